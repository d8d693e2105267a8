#pragma once

#include <stdexcept>
#include <string>

namespace fallacy {

/// Base of every recoverable harness error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raw dataset files missing, unreadable or empty.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// A record or annotation violates the normalized schema (unknown label, bad index, ...).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Inconsistent run, scheme or backend configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A prompt template references a placeholder that has no binding.
class TemplateError : public Error {
public:
    TemplateError(const std::string& placeholder, const std::string& message)
        : Error(message), placeholder_(placeholder) {}
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

/// Non-success from the chat endpoint after the retry policy was exhausted.
class TransportError : public Error {
public:
    TransportError(int status, int attempts, const std::string& message)
        : Error(message), status_(status), attempts_(attempts) {}
    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    int attempts_;
};

/// Replay cache has no response for a request digest.
class CacheMissError : public Error {
public:
    explicit CacheMissError(const std::string& digest)
        : Error("replay cache miss for request digest " + digest), digest_(digest) {}
    const std::string& digest() const noexcept { return digest_; }

private:
    std::string digest_;
};

/// Too many transport failures; the run stopped after writing a partial manifest.
class RunAborted : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace fallacy
