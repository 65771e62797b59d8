#include "vforest/error.hpp"

namespace vforest {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::validation: return "validation";
    case ErrorCode::parse: return "parse";
    case ErrorCode::provider: return "provider";
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::checksum: return "checksum";
    case ErrorCode::internal: return "internal";
    }
    return "unknown";
}

IngestError::IngestError(std::size_t line, const std::string& message)
    : Error(ErrorCode::validation,
            line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

} // namespace vforest
