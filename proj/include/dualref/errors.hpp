#pragma once

#include <stdexcept>
#include <string>

namespace dualref {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class IoErrorKind {
    Open,
    BadMagic,
    Truncated,
    DimensionMismatch,
    SchemaError,
    ParseError,
    DuplicateIndex,
    MissingIndex,
};

const char* to_string(IoErrorKind kind);

class IoError : public Error {
public:
    IoError(IoErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    IoErrorKind kind() const noexcept { return kind_; }

private:
    IoErrorKind kind_;
};

/// Invalid configuration value; `key()` names the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Non-finite loss, collapsed memory entry, or another divergence during training.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace dualref
