#pragma once

#include <stdexcept>
#include <string>

namespace okr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or dimension mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Precondition on a scalar argument or configuration value violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A linear system is singular or too badly conditioned to trust.
/// `condition()` carries the estimate that tripped the guard (inf when the
/// factorization itself broke down).
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    explicit NumericalError(const std::string& what) : NumericalError(what, 0.0) {}

    [[nodiscard]] double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Malformed file or unreadable path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace okr
