#pragma once

#include <stdexcept>
#include <string>

namespace robustdet {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (unknown key, bad range, unknown mode).
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& message)
        : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
    explicit ConfigError(const std::string& message) : Error(message) {}

    /// Dotted name of the offending key, empty when not key-specific.
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class IngestionError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

/// Raised when a DDIM step would move the state outside [0, T].
class DiffusionStepError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class ReportError : public Error {
public:
    using Error::Error;
};

}  // namespace robustdet
