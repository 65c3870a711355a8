#pragma once

#include <stdexcept>
#include <string>

namespace cinegroup {

/// Invariant violation on a domain type or malformed argument.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure (open, read, write).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (divergence, non-finite values where finite required).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Structural problem with a tensor container file. The code pins down which
/// part of the format was violated.
class container_error : public std::runtime_error {
public:
    enum class code {
        bad_magic,
        bad_header,
        truncated_payload,
        dtype_mismatch,
        shape_mismatch,
    };

    container_error(code c, const std::string& what) : std::runtime_error(what), code_(c) {}
    code error_code() const { return code_; }

private:
    code code_;
};

}  // namespace cinegroup
