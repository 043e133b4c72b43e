#pragma once

#include <stdexcept>
#include <string>

namespace curveflow {

/// Raised for invalid inputs to numerical operations (bad order, L <= 0, NaN fields).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised while loading or validating a run configuration.  The message
/// always names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace curveflow
