#ifndef OSHEDA_ERRORS_HPP
#define OSHEDA_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace osheda {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (bad dimension, lambda out of range, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Matrix/batch dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Operation called in the wrong order (e.g. backward without forward).
class StateError : public Error {
public:
    using Error::Error;
};

/// Non-finite value encountered; carries the layer or epoch index.
class NumericError : public Error {
public:
    NumericError(const std::string& msg, long index)
        : Error(msg), index_(index) {}
    long index() const noexcept { return index_; }

private:
    long index_;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Empty or inconsistent batch/dataset handed to an operation.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Input lacks information the operation needs (e.g. no generator truth).
class UnsupportedInputError : public Error {
public:
    using Error::Error;
};

} // namespace osheda

#endif
