#include "redcert/bridge_client.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>

#include <json.hpp>

#include "redcert/error.hpp"

namespace redcert::bridge {

using Json = nlohmann::ordered_json;

std::string encode_request(std::int64_t id, const std::string& case_digest, const IndexSet& redaction,
                           double value) {
  Json runs = Json::array();
  for (const Run& r : redaction.runs()) runs.push_back(Json::array({r.start, r.length}));
  Json frame{{"id", id},
             {"case", case_digest},
             {"redact", Json{{"rle", std::move(runs)}, {"value", value}}}};
  return frame.dump();
}

WireResponse decode_response(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bridge response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer()) {
    throw FormatError("bridge response lacks an integer id");
  }
  WireResponse out;
  out.id = j["id"].get<std::int64_t>();
  if (j.contains("softmax")) {
    const Json& s = j["softmax"];
    if (!s.is_array()) throw FormatError("bridge softmax must be an array");
    std::vector<double> probs;
    probs.reserve(s.size());
    for (const Json& x : s) {
      if (!x.is_number()) throw FormatError("bridge softmax entries must be numbers");
      probs.push_back(x.get<double>());
    }
    out.softmax = std::move(probs);
  } else if (j.contains("error")) {
    const Json& e = j["error"];
    if (!e.is_object()) throw FormatError("bridge error must be an object");
    out.error = WireError{e.value("code", std::string("unknown")), e.value("msg", std::string())};
  } else {
    throw FormatError("bridge response has neither softmax nor error");
  }
  return out;
}

namespace {

class FdTransport : public Transport {
 public:
  FdTransport(int write_fd, int read_fd, pid_t child)
      : write_fd_(write_fd), read_fd_(read_fd), child_(child) {}

  ~FdTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }

  void send_line(const std::string& line) override {
    std::string framed = line;
    framed.push_back('\n');
    std::size_t off = 0;
    while (off < framed.size()) {
      const ssize_t n = ::write(write_fd_, framed.data() + off, framed.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvaluationError(std::string("bridge write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string recv_line() override {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvaluationError(std::string("bridge read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw EvaluationError("bridge closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int write_fd_;
  int read_fd_;
  pid_t child_;
  std::string buffer_;
};

}  // namespace

std::unique_ptr<Transport> spawn_process(const std::vector<std::string>& argv) {
  if (argv.empty()) throw EvaluationError("bridge command is empty");
  // A bridge that exits early must surface as a read error, not kill us.
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw EvaluationError("pipe() failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw EvaluationError("pipe() failed");
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) throw EvaluationError("fork() failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
  return std::make_unique<FdTransport>(to_child[1], from_child[0], pid);
}

std::unique_ptr<Transport> connect_unix_socket(const std::string& path) {
  ::signal(SIGPIPE, SIG_IGN);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw EvaluationError("socket() failed");
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) {
    ::close(fd);
    throw EvaluationError("socket path too long: " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw EvaluationError("cannot connect to bridge socket " + path + ": " + why);
  }
  return std::make_unique<FdTransport>(fd, fd, -1);
}

BridgeModel::BridgeModel(std::string model_id, std::size_t label_count, InputVector case_input,
                         std::unique_ptr<Transport> transport)
    : model_id_(std::move(model_id)),
      label_count_(label_count),
      case_input_(std::move(case_input)),
      transport_(std::move(transport)) {
  if (!transport_) throw EvaluationError("bridge model needs a transport");
}

SoftmaxVector BridgeModel::evaluate(const InputVector& input) const {
  const auto base = case_input_.values();
  const auto cur = input.values();
  std::vector<std::uint32_t> changed;
  std::optional<std::uint32_t> value_bits;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const auto a = std::bit_cast<std::uint32_t>(base[i]);
    const auto b = std::bit_cast<std::uint32_t>(cur[i]);
    if (a == b) continue;
    if (value_bits && *value_bits != b) {
      throw EvaluationError("input is not a single-value redaction of the bridge case input");
    }
    value_bits = b;
    changed.push_back(static_cast<std::uint32_t>(i));
  }
  const double value = value_bits ? std::bit_cast<float>(*value_bits) : 0.0;
  const IndexSet redaction = IndexSet::from_sorted(std::move(changed));

  std::lock_guard lock(mu_);
  const std::int64_t id = next_id_++;
  transport_->send_line(encode_request(id, case_input_.digest(), redaction, value));
  WireResponse resp;
  try {
    resp = decode_response(transport_->recv_line());
  } catch (const FormatError& e) {
    throw EvaluationError(std::string("bridge protocol violation: ") + e.what());
  }
  if (resp.id != id) {
    throw EvaluationError("bridge answered request " + std::to_string(id) + " with id " +
                          std::to_string(resp.id));
  }
  if (resp.error) {
    throw EvaluationError("bridge error [" + resp.error->code + "]: " + resp.error->msg);
  }
  return SoftmaxVector{std::move(*resp.softmax)};
}

}  // namespace redcert::bridge
