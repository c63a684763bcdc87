#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace isda {

/// A numerical failure raised by one of the library modules. The message is
/// prefixed with the module tag, e.g. "[riccati] no convergence after ...".
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message),
        module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Violated precondition on an argument (bad dimension, out-of-range
/// parameter). Callers can treat it as a usage error.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace isda
