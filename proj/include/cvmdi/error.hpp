#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cvmdi {

/// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
    Domain,     // invalid argument to an operation
    Config,     // inconsistent or infeasible configuration
    Sync,       // synchronization, alignment or pilot-tracking failure
    Numerical,  // unphysical state or singular numerics
    Io,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Config: return "config";
        case ErrorKind::Sync: return "sync";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct SyncError : Error {
    explicit SyncError(const std::string& w) : Error(ErrorKind::Sync, w) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

/// Raised by the harness when a pipeline stage fails; keeps the kind of the
/// underlying error and names the stage.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.kind(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

namespace detail {
inline void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}
}  // namespace detail

}  // namespace cvmdi
