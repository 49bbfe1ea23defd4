#pragma once

#include <stdexcept>
#include <string>

namespace sigfd {

// Model evaluated outside its mathematical domain (e.g. q > q_cap).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Theta coefficients incompatible with the requested green split.
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input data insufficient or inconsistent for the requested operation.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values encountered inside a numerical routine.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
struct ParseError : std::runtime_error {
    ParseError(const std::string& path, std::size_t line, const std::string& reason)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + reason),
          line_number(line) {}
    std::size_t line_number;
};

// Signal event log violates start/end pairing after sorting.
struct OrderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing or contradictory configuration entries.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computed value broke a type invariant (corrupt upstream data).
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure writing an output.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sigfd
