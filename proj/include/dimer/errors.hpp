#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dimer {

enum class ErrorKind {
    Index,
    Capacity,
    Shape,
    Ordering,
    Parity,
    Disjointness,
    Normalization,
    Unsupported,
    Domain,
    Stability,
    Degeneracy,
    InvalidState,
    Parse,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Raised when a unique steady state was requested but the nullspace is larger.
class DegeneracyError : public Error {
public:
    DegeneracyError(std::size_t null_dim, const std::string& what)
        : Error(ErrorKind::Degeneracy, what), null_dim_(null_dim) {}

    std::size_t null_dim() const noexcept { return null_dim_; }

private:
    std::size_t null_dim_;
};

class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Index: return "index";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Parity: return "parity";
    case ErrorKind::Disjointness: return "disjointness";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Stability: return "stability";
    case ErrorKind::Degeneracy: return "degeneracy";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace dimer
