#pragma once

#include <stdexcept>
#include <string>

namespace gnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ValueError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration; `key()` names the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what) : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Base for malformed or corrupted files.
class FormatError : public Error {
public:
    using Error::Error;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class CrcError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace gnet
