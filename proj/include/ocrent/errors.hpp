#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ocrent {

// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Violated invariant, bad parameter, infeasible query. Maps to CLI exit 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed textual input; carries the byte offset of the first offending byte.
// Maps to CLI exit 1.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t byte_offset)
        : Error(message + " (byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Filesystem failure. Maps to CLI exit 2.
class IoError : public Error {
public:
    using Error::Error;
};

// Network-level failure (connect, send, receive, exhausted retries).
// Maps to CLI exit 2.
class TransportError : public Error {
public:
    using Error::Error;
};

// Non-retryable HTTP status; keeps the status code and the server's message.
class RequestError : public TransportError {
public:
    RequestError(int status, const std::string& server_message)
        : TransportError("HTTP " + std::to_string(status) + ": " + server_message),
          status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

// Missing or rejected credential.
class CredentialError : public TransportError {
public:
    using TransportError::TransportError;
};

// The call succeeded but the response lacks a requested field (e.g. logprobs).
class DegradedResponseError : public TransportError {
public:
    using TransportError::TransportError;
};

}  // namespace ocrent
