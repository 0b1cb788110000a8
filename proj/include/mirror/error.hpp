#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mirror {

enum class ErrorCode {
    InvalidArgument,
    IllegalTransition,
    MissingSlot,
    NoJsonFound,
    MalformedJson,
    SchemaError,
    TransportError,
    ApiError,
    ScriptExhausted,
    ReplayMismatch,
    StepGap,
    RoundGap,
    ParseExhausted,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Base of every error thrown by the library. Backend, parse and memory
// failures all travel as subclasses so callers can branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class MissingSlot : public Error {
public:
    explicit MissingSlot(std::string slot)
        : Error(ErrorCode::MissingSlot, "MissingSlot(\"" + slot + "\")"), slot_(std::move(slot)) {}
    const std::string& slot() const noexcept { return slot_; }

private:
    std::string slot_;
};

class MalformedJson : public Error {
public:
    MalformedJson(std::size_t offset, const std::string& detail)
        : Error(ErrorCode::MalformedJson,
                "MalformedJson at byte " + std::to_string(offset) + ": " + detail),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class SchemaError : public Error {
public:
    explicit SchemaError(std::vector<std::string> problems)
        : Error(ErrorCode::SchemaError, join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "SchemaError:";
        for (const auto& p : problems) {
            out += " ";
            out += p;
            out += ";";
        }
        return out;
    }
    std::vector<std::string> problems_;
};

class ApiError : public Error {
public:
    ApiError(int status, const std::string& body)
        : Error(ErrorCode::ApiError, "ApiError: HTTP " + std::to_string(status) + ": " + body),
          status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class ReplayMismatch : public Error {
public:
    ReplayMismatch(std::size_t call_index, std::size_t offset)
        : Error(ErrorCode::ReplayMismatch,
                "ReplayMismatch: request " + std::to_string(call_index) +
                    " diverges from the recording at byte " + std::to_string(offset)),
          call_index_(call_index), offset_(offset) {}
    std::size_t call_index() const noexcept { return call_index_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t call_index_;
    std::size_t offset_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IllegalTransition: return "IllegalTransition";
        case ErrorCode::MissingSlot: return "MissingSlot";
        case ErrorCode::NoJsonFound: return "NoJsonFound";
        case ErrorCode::MalformedJson: return "MalformedJson";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::ApiError: return "ApiError";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::ReplayMismatch: return "ReplayMismatch";
        case ErrorCode::StepGap: return "StepGap";
        case ErrorCode::RoundGap: return "RoundGap";
        case ErrorCode::ParseExhausted: return "ParseExhausted";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace mirror
