#pragma once

#include <stdexcept>
#include <string>

namespace redcert {

// Base for every failure the library reports as an exception. Search
// failures are not errors; they come back as SearchOutcome::Kind::undetermined.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexRangeError : public Error {
 public:
  using Error::Error;
};

// Model evaluation failed (bridge transport, malformed softmax, ...).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Malformed file or payload: certificates, bundles, binary tensors.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Certificate addressed to a different input, model or checkpoint.
class CertificateMismatch : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied parameter (delta range, label choice, strategy).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class LowPredictionError : public Error {
 public:
  using Error::Error;
};

class OracleLimitError : public Error {
 public:
  using Error::Error;
};

class FixtureError : public Error {
 public:
  using Error::Error;
};

}  // namespace redcert
