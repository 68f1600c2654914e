import json
import math

import pytest

import redcert


def test_index_set_runs():
    s = redcert.IndexSet([5, 1, 2, 3, 3])
    assert s.runs() == [(1, 3), (5, 1)]
    assert len(s) == 4 and 5 in s and 4 not in s
    assert redcert.IndexSet.from_runs([(1, 3), (5, 1)]) == s
    assert s.intersection(redcert.IndexSet([2, 9])).indices() == [2]
    with pytest.raises(redcert.FormatError):
        redcert.IndexSet.from_runs([(4, 2), (1, 1)])


def test_redact_and_digest():
    x = redcert.InputVector([1.0, -2.5, 0.0])
    y = redcert.redact(x, redcert.IndexSet([1]), 7.0)
    assert y.values() == [1.0, 7.0, 0.0]
    assert x.digest.startswith("738e86d6")


def test_fixture_classifies_disjoint():
    f = redcert.generate_fixture("planted-disjoint", seed=3)
    case = redcert.make_pair_case(f.model, f.input, f.seg, f.l1, f.l2, delta=0.2)
    out = redcert.classify_pair(case)
    assert out.kind == "DISJOINT"
    assert out.decided_by == "alg1"
    cert = out.certificate
    assert redcert.certificate_kind(cert) == "disjoint"
    report = redcert.verify(cert, f.model, f.input, f.seg)
    assert report["verdict"] == "accepted"
    assert all(row[3] for row in report["conditions"])
    assert redcert.oracle_exists(f.model, f.input, f.seg, f.l1, f.l2, 0.2) == (True, False)


def test_overlap_fixture():
    f = redcert.generate_fixture("planted-overlap", seed=1)
    case = redcert.make_pair_case(f.model, f.input, f.seg, f.l1, f.l2)
    out = redcert.classify_pair(case)
    assert out.kind == "OVERLAPPING"
    assert redcert.verify(out.certificate, f.model, f.input, f.seg)["verdict"] == "accepted"


def test_canonical_round_trip():
    f = redcert.generate_fixture("planted-disjoint", seed=0)
    case = redcert.make_pair_case(f.model, f.input, f.seg, f.l1, f.l2)
    text = redcert.run_strategy(case, "alg1").certificate
    assert redcert.canonical_certificate(text) == text
    assert redcert.canonical_certificate(json.dumps(json.loads(text))) == text
    with pytest.raises(redcert.FormatError):
        redcert.canonical_certificate('{"kind": "disjoint"}')


def softmax(z):
    m = max(z)
    e = [math.exp(v - m) for v in z]
    t = sum(e)
    return [v / t for v in e]


def test_callable_model():
    # Label 0 reads the first half of the input, label 1 the second half.
    n = 8
    seen = []

    def fn(values):
        seen.append(1)
        a = sum(values[: n // 2])
        b = sum(values[n // 2 :])
        return softmax([a, b, 6.0])

    model = redcert.CallableModel(fn, "halves", n, 3)
    x = redcert.InputVector([2.0] * n)
    seg = redcert.Segmentation([0, 0, 1, 1, 2, 2, 3, 3])
    case = redcert.make_pair_case(model, x, seg, redcert.LabelId(0), redcert.LabelId(1), delta=0.2)
    out = redcert.classify_pair(case, "alg1")
    assert out.kind == "DISJOINT"
    assert redcert.verify(out.certificate, model, x, seg)["verdict"] == "accepted"
    assert model.evaluations == len(seen)


def test_callable_model_errors():
    model = redcert.CallableModel(lambda v: [0.5, 0.2], "bad", 2, 2)
    with pytest.raises(redcert.EvaluationError):
        redcert.predict(model, redcert.InputVector([0.0, 0.0]))

    def boom(v):
        raise ValueError("nope")

    with pytest.raises(redcert.EvaluationError):
        redcert.predict(redcert.CallableModel(boom, "boom", 2, 2), redcert.InputVector([0.0, 0.0]))


def test_bundle_round_trip(tmp_path):
    f = redcert.generate_fixture("planted-disjoint", seed=4)
    redcert.write_fixture_bundle(f, str(tmp_path / "b"), with_attributions=True)
    b = redcert.load_bundle(str(tmp_path / "b"))
    assert b.input.digest == f.input.digest
    assert set(b.baseline) == {0, 1}
    assert abs(redcert.predict(b.model, b.input)[0] - b.baseline[0]) < 1e-9
