#pragma once

#include <stdexcept>
#include <string>

namespace dastm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called with inputs that violate its precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Invalid or unreadable configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent data files or records (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace dastm
