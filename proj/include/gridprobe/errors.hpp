#pragma once

#include <stdexcept>
#include <string>

namespace gridprobe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (JSON syntax or schema).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a model invariant (connectivity, partition, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Voltage angle requested at a bus with v = 0.
class ZeroVoltageError : public Error {
public:
    explicit ZeroVoltageError(int bus);
    int bus() const noexcept { return bus_; }

private:
    int bus_;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations);
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Internal consistency failure; signals a bug rather than bad input.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace gridprobe
