#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "redcert/index_set.hpp"
#include "redcert/model.hpp"

// Client side of the bridge wire protocol: newline-delimited UTF-8 JSON frames.
//   request  {"id": int, "case": digest, "redact": {"rle": [[start, len], ...], "value": float}}
//   response {"id": int, "softmax": [floats]} | {"id": int, "error": {"code": str, "msg": str}}
namespace redcert::bridge {

struct WireError {
  std::string code;
  std::string msg;
};

struct WireResponse {
  std::int64_t id = 0;
  std::optional<std::vector<double>> softmax;
  std::optional<WireError> error;
};

std::string encode_request(std::int64_t id, const std::string& case_digest, const IndexSet& redaction,
                           double value);
// Throws FormatError for frames that are neither a softmax nor an error response.
WireResponse decode_response(const std::string& line);

// A bidirectional line channel.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws EvaluationError when the peer closed the channel.
  virtual std::string recv_line() = 0;
};

// Spawns argv[0] with the given arguments and talks over its stdin/stdout.
std::unique_ptr<Transport> spawn_process(const std::vector<std::string>& argv);
// Connects to a unix-domain stream socket.
std::unique_ptr<Transport> connect_unix_socket(const std::string& path);

// A Model whose evaluations are served by a bridge endpoint for one case.
// Inputs must be single-value redactions of the case input; anything else
// is an EvaluationError. Calls are serialized over the one connection.
class BridgeModel final : public Model {
 public:
  BridgeModel(std::string model_id, std::size_t label_count, InputVector case_input,
              std::unique_ptr<Transport> transport);

  [[nodiscard]] const std::string& model_id() const override { return model_id_; }
  [[nodiscard]] std::size_t input_dim() const override { return case_input_.size(); }
  [[nodiscard]] std::size_t label_count() const override { return label_count_; }

 protected:
  [[nodiscard]] SoftmaxVector evaluate(const InputVector& input) const override;

 private:
  std::string model_id_;
  std::size_t label_count_;
  InputVector case_input_;
  std::unique_ptr<Transport> transport_;
  mutable std::mutex mu_;
  mutable std::int64_t next_id_ = 1;
};

}  // namespace redcert::bridge
