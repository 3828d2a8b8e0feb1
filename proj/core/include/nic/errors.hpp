#pragma once

#include <stdexcept>
#include <string>

namespace nic {

// Bad shapes, invalid arguments, malformed configs.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Referenced model/data files missing or unreadable.
class NotFoundError : public std::runtime_error {
 public:
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf surfaced, diverging optimization, corrupt coded streams.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nic
