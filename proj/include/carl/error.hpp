#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace carl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or missing configuration (scenario, trainer config, stats). CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// API misuse, e.g. a stale forward cache handed to backward().
class UsageError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Non-finite values during optimization.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Schema violation while reading a file; carries the 1-based line and field name.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string field, const std::string& what)
        : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
          line_(line),
          field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

}  // namespace carl
