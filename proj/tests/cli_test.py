#!/usr/bin/env python3
"""End-to-end checks of the redcert command line. Usage: cli_test.py REDCERT_BINARY"""

import json
import os
import shutil
import subprocess
import sys
import tempfile

BIN = os.path.abspath(sys.argv[1])
failures = []


def run(*args):
    proc = subprocess.run([BIN, *args], capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def check(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name)
    if not cond:
        failures.append(name)
        if detail:
            print(detail)


def fixture(tmp, kind, seed, name):
    path = os.path.join(tmp, name)
    code, out, err = run("make-fixture", "--kind", kind, "--seed", str(seed), "--out", path)
    assert code == 0, err
    return path


def main():
    tmp = tempfile.mkdtemp(prefix="redcert_cli_")
    try:
        disjoint = fixture(tmp, "planted-disjoint", 1, "disjoint")
        overlap = fixture(tmp, "planted-overlap", 1, "overlap")
        noise = fixture(tmp, "noise", 1, "noise")
        other = fixture(tmp, "planted-disjoint", 2, "other")

        out_d = os.path.join(tmp, "out_d")
        code, out, err = run("analyze", disjoint, "--labels", "0,1", "--delta", "0.2", "--out", out_d)
        check("analyze disjoint", code == 0 and out.strip() == "DISJOINT", out + err)
        cert = os.path.join(out_d, "certificate.json")
        check("certificate written", os.path.exists(cert))
        with open(os.path.join(out_d, "trace.tsv")) as fh:
            header = fh.readline().rstrip("\n").split("\t")
        check("trace header", header == ["sweep", "step", "segment", "p_l1", "p_l2", "pct_l1", "pct_l2"], str(header))

        code, out, err = run("analyze", disjoint, "--labels", "l0,l1", "--out", os.path.join(tmp, "named"))
        check("labels by name", code == 0 and out.strip() == "DISJOINT", out + err)

        code, out, _ = run("analyze", overlap, "--out", os.path.join(tmp, "out_o"))
        check("analyze overlap", code == 0 and out.strip() == "OVERLAPPING", out)
        code, out, _ = run("analyze", noise, "--out", os.path.join(tmp, "out_n"), "--min-p", "0.001")
        check("analyze noise", code == 0 and out.strip() == "UNDETERMINED", out)
        check("no certificate for undetermined", not os.path.exists(os.path.join(tmp, "out_n", "certificate.json")))

        code, _, err = run("analyze", disjoint, "--delta", "0.7", "--out", os.path.join(tmp, "bad"))
        check("delta out of range exits 2", code == 2, err)
        code, _, err = run("analyze", disjoint, "--min-p", "0.99", "--out", os.path.join(tmp, "bad"))
        check("low prediction exits 2", code == 2, err)
        code, _, err = run("analyze", os.path.join(tmp, "missing"), "--out", os.path.join(tmp, "bad"))
        check("missing bundle exits 2", code == 2, err)
        code, _, err = run("analyze", disjoint, "--strategy", "alg9", "--out", os.path.join(tmp, "bad"))
        check("unknown strategy exits 2", code == 2, err)

        code, out, err = run("verify", cert, "--bundle", disjoint)
        rows = [l for l in out.splitlines() if "p_l" in l]
        check("verify accepts", code == 0 and "verdict: accepted" in out, out + err)
        check("four condition rows pass", len(rows) == 4 and all("PASS" in r for r in rows), out)

        code, _, err = run("verify", cert, "--bundle", other)
        check("wrong input exits 2", code == 2, err)

        forged = os.path.join(tmp, "forged.json")
        code, _, err = run("forge", cert, "--out", forged)
        check("forge", code == 0, err)
        with open(forged) as fh:
            forged_json = json.load(fh)
        check("forged kind", forged_json["kind"] == "overlap")
        counter = os.path.join(tmp, "counter.json")
        code, out, err = run("verify", forged, "--bundle", disjoint, "--counter-out", counter)
        check("forged rejected as disjoint", code == 1 and "rejected-as-disjoint" in out and counter in out, out + err)
        code, out, _ = run("verify", counter, "--bundle", disjoint)
        check("counter-certificate verifies", code == 0, out)

        with open(cert) as fh:
            plain = json.load(fh)
        plain.pop("segments1")
        plain.pop("segments2")
        bare = os.path.join(tmp, "bare.json")
        with open(bare, "w") as fh:
            json.dump(plain, fh)
        code, _, err = run("forge", bare, "--out", os.path.join(tmp, "x.json"))
        check("forge without segments exits 2", code == 2, err)

        # An empty S2 degenerates the forgery to S1, which cannot collapse l2.
        with open(cert) as fh:
            degenerate = json.load(fh)
        degenerate["s2"] = {"rle": []}
        degenerate["segments2"] = []
        deg = os.path.join(tmp, "deg.json")
        with open(deg, "w") as fh:
            json.dump(degenerate, fh)
        run("forge", deg, "--out", os.path.join(tmp, "deg_forged.json"))
        code, out, _ = run("verify", os.path.join(tmp, "deg_forged.json"), "--bundle", disjoint)
        check("degenerate forgery rejected at step 1", code == 1 and "FAIL  p_l2(S)" in out, out)

        report = os.path.join(tmp, "bench.json")
        code, _, err = run("bench", "--kind", "planted-disjoint", "--trials", "20", "--strategy", "alg1", "--report", report)
        with open(report) as fh:
            rep = json.load(fh)
        check("bench disjoint alg1", code == 0 and rep["algorithms"]["alg1"]["success_rate"] == 1.0, err)
        check("bench report has no wall time by default", "wall_seconds" not in rep["algorithms"]["alg1"])
        code, _, _ = run("bench", "--kind", "planted-overlap", "--trials", "20", "--strategy", "alg1,overlap",
                         "--report", report, "--timing")
        with open(report) as fh:
            rep = json.load(fh)
        check("bench overlap", rep["algorithms"]["alg1"]["success_rate"] == 0.0
              and rep["algorithms"]["overlap"]["success_rate"] == 1.0
              and "wall_seconds" in rep["algorithms"]["overlap"])
        code, _, _ = run("bench", "--trials", "0", "--report", report)
        with open(report) as fh:
            rep = json.load(fh)
        check("bench zero trials", code == 0 and rep["trials"] == 0)

        a = os.path.join(tmp, "r1.json")
        b = os.path.join(tmp, "r2.json")
        run("bench", "--trials", "5", "--report", a, "--jobs", "1")
        run("bench", "--trials", "5", "--report", b, "--jobs", "4")
        with open(a, "rb") as fa, open(b, "rb") as fb:
            check("bench report is deterministic", fa.read() == fb.read())
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    if failures:
        print("%d failure(s)" % len(failures))
        sys.exit(1)


if __name__ == "__main__":
    main()
