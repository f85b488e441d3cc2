#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iarn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid settings or insufficient data for the requested work.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered, or a computation that is undefined for the input.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV input. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Failure while reading a model file.
class ModelLoadError : public Error {
public:
    enum class Kind { MissingFile, Schema, Version, Validation };

    ModelLoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Backward pass invoked with a cache that does not belong to the given parameters.
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace iarn
