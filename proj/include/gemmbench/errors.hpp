#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gemmbench {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Bad argument value (non-positive time, empty range, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Launch geometry or device profile violates a constraint.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A launch needs more of a device resource than the profile provides.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Out-of-bounds memory access inside a simulated kernel.
class FaultError : public Error {
public:
    using Error::Error;
};

/// Work items of one group disagree on the number of barriers reached.
class BarrierError : public Error {
public:
    using Error::Error;
};

/// Cached state does not belong to the object it is used with.
class StateError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (bad magic, unexpected dims, bad JSON).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input file ends before its header says it should.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Two inputs that must agree (e.g. image and label counts) do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A timed invocation failed; carries the failing iteration.
class RunError : public Error {
public:
    RunError(const std::string& what, std::size_t iteration) : Error(what), iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

}  // namespace gemmbench
