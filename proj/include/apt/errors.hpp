#pragma once

#include <stdexcept>
#include <string>

namespace apt {

/// Invalid user input: bad config key, malformed file, shape mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure during sampling or numerical evaluation.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace apt
