#pragma once

#include <stdexcept>
#include <string>

namespace lsfm {

// Bad or missing inputs (manifest, rasters, config). CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  InputError(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Numerical / estimation failures. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

}  // namespace lsfm
