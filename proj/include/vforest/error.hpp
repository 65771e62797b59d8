#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vforest {

enum class ErrorCode {
    invalid_argument,
    validation,
    parse,
    provider,
    io,
    format,
    version_mismatch,
    checksum,
    internal,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised by stream ingestion; line is 1-based, 0 when the problem is not
// tied to a single record (e.g. a missing frame referenced by a detection).
class IngestError : public Error {
public:
    IngestError(std::size_t line, const std::string& message);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ProviderError : public Error {
public:
    ProviderError(int rpc_code, const std::string& message)
        : Error(ErrorCode::provider, message), rpc_code_(rpc_code) {}

    int rpc_code() const noexcept { return rpc_code_; }

private:
    int rpc_code_;
};

} // namespace vforest
