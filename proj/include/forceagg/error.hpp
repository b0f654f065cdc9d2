#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace forceagg {

// Bad input data: malformed logs, unknown class ids, invalid specs.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A report-log line that failed to parse. Carries the 1-based line number
// and the offending field name.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, std::string field, const std::string& what)
        : DataError("line " + std::to_string(line) + ", field '" + field + "': " + what),
          line_(line), field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

// Annealing hit its sweep cap before the spins froze.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace forceagg
