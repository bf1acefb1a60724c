#pragma once

#include <stdexcept>
#include <string>

namespace protocalib {

enum class ErrorKind {
    InvalidArgument,
    Parse,
    Validation,
    Numeric,
    Io,
};

/// Single exception type for the library. The kind decides the C error code
/// and the CLI exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace protocalib
