#pragma once

#include <stdexcept>
#include <string>

namespace qqnet {

/// Precondition or numeric-domain violation (bad scale, wrong channel count, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File was readable but its contents are malformed or unsupported.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dataset directory could not be turned into a consistent index.
class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DomainError(what);
}

}  // namespace detail
}  // namespace qqnet
