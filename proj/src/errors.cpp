#include "gridprobe/errors.hpp"

namespace gridprobe {

ZeroVoltageError::ZeroVoltageError(int bus)
    : Error("zero-voltage bus " + std::to_string(bus)), bus_(bus) {}

ConvergenceError::ConvergenceError(const std::string& what, double residual, int iterations)
    : Error(what + " (residual " + std::to_string(residual) + " after " +
            std::to_string(iterations) + " iterations)"),
      residual_(residual),
      iterations_(iterations) {}

}  // namespace gridprobe
