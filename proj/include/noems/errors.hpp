#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noems {

/// Inconsistent cross-sections, grids, profiles or parameter sets.
class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Missing, unreadable or invalid configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Eigensolver or optimizer failure.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No guided mode where one is required.
class CutoffError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Query outside the range covered by a table or curve.
class CoverageError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Malformed input text or file, with an optional 1-based position.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0)
        : std::runtime_error(format(message, line, column)), line_(line), column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    static std::string format(const std::string& message, std::size_t line, std::size_t column) {
        if (line == 0) return message;
        return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
};

}  // namespace noems
