#pragma once

#include <stdexcept>
#include <string>

namespace nngpw {

/// Invalid configuration, shapes or arguments. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A matrix that must be positive semi-definite is not, beyond tolerance.
class NotPsdError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A requested computation exceeds a configured size cap.
class ResourceLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

}  // namespace nngpw
