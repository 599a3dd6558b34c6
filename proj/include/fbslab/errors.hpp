#pragma once

#include <stdexcept>
#include <string>

namespace fbslab {

/// Invalid user-facing parameter. `key()` names the offending config key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Factorization failure, degenerate weights or other numeric breakdown.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Long-run variance is zero, so a CLT normalization is meaningless.
class DegenerateModelError : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fbslab
