#pragma once

#include <stdexcept>
#include <string>

namespace cvgad {

/// Bad or inconsistent user configuration. CLI exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed bundles, violated graph invariants, bookkeeping bugs. CLI exit code 3.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values during training or scoring. CLI exit code 4.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cvgad
