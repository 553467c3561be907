#pragma once

#include <stdexcept>
#include <string>

namespace tcf {

// Error taxonomy used across the library. Everything derives from Error so
// callers can catch broadly; the CLI maps ValidationError/ConfigError to
// exit code 1 and the rest to 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (carries a line number where applicable).
struct ParseError : Error {
    explicit ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? "parse error at line " + std::to_string(line) + ": " + msg : "parse error: " + msg),
          line_number(line) {}
    long line_number;
};

// Structurally inconsistent input (e.g. declared record count != actual).
struct StructuralError : Error {
    explicit StructuralError(const std::string& msg) : Error("structural error: " + msg) {}
};

// A value violates a documented invariant.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error("validation error: " + msg) {}
};

// Requested region not covered by the data domain.
struct CoverageError : Error {
    explicit CoverageError(const std::string& msg) : Error("coverage error: " + msg) {}
};

// Exact lookup failed (no interpolation is ever attempted).
struct LookupError : Error {
    explicit LookupError(const std::string& msg) : Error("lookup error: " + msg) {}
};

// Bad or contradictory configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// Operation invoked in the wrong state (e.g. missing normalization stats).
struct StateError : Error {
    explicit StateError(const std::string& msg) : Error("state error: " + msg) {}
};

// Numerical failure (NaN/Inf encountered where finite values are required).
struct ComputeError : Error {
    explicit ComputeError(const std::string& msg) : Error("compute error: " + msg) {}
};

// Checkpoint/config incompatibility on resume.
struct IncompatibleError : Error {
    explicit IncompatibleError(const std::string& msg) : Error("incompatible: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace tcf
