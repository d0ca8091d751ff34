#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace hirec {

// Error codes used across the library. The string form is stable and is
// what the CLI and HTTP service emit in error payloads.
enum class ErrorCode {
    // validation
    EMPTY_SYMPTOMS,
    AGE_OUT_OF_RANGE,
    INVALID_DOCUMENT,
    INVALID_ARGUMENT,
    // vector index
    DUPLICATE_ID,
    DIMENSION_MISMATCH,
    // persistence / files
    IO_ERROR,
    FORMAT_VERSION_MISMATCH,
    CORRUPT_SNAPSHOT,
    // ingestion
    PARSE_ERROR,
    MISSING_FIELD,
    // embedding
    EMPTY_TEXT,
    REMOTE_UNAVAILABLE,
    REMOTE_BAD_RESPONSE,
    // reasoning
    BACKEND_UNAVAILABLE,
    UNPARSEABLE_RESPONSE,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EMPTY_SYMPTOMS: return "EMPTY_SYMPTOMS";
        case ErrorCode::AGE_OUT_OF_RANGE: return "AGE_OUT_OF_RANGE";
        case ErrorCode::INVALID_DOCUMENT: return "INVALID_DOCUMENT";
        case ErrorCode::INVALID_ARGUMENT: return "INVALID_ARGUMENT";
        case ErrorCode::DUPLICATE_ID: return "DUPLICATE_ID";
        case ErrorCode::DIMENSION_MISMATCH: return "DIMENSION_MISMATCH";
        case ErrorCode::IO_ERROR: return "IO_ERROR";
        case ErrorCode::FORMAT_VERSION_MISMATCH: return "FORMAT_VERSION_MISMATCH";
        case ErrorCode::CORRUPT_SNAPSHOT: return "CORRUPT_SNAPSHOT";
        case ErrorCode::PARSE_ERROR: return "PARSE_ERROR";
        case ErrorCode::MISSING_FIELD: return "MISSING_FIELD";
        case ErrorCode::EMPTY_TEXT: return "EMPTY_TEXT";
        case ErrorCode::REMOTE_UNAVAILABLE: return "REMOTE_UNAVAILABLE";
        case ErrorCode::REMOTE_BAD_RESPONSE: return "REMOTE_BAD_RESPONSE";
        case ErrorCode::BACKEND_UNAVAILABLE: return "BACKEND_UNAVAILABLE";
        case ErrorCode::UNPARSEABLE_RESPONSE: return "UNPARSEABLE_RESPONSE";
    }
    return "UNKNOWN";
}

struct Error {
    ErrorCode code;
    std::string message;
    // Optional location info: input line for ingestion errors, batch index
    // for pointwise operations. -1 when not applicable.
    long line = -1;
    long index = -1;

    std::string describe() const {
        std::string out = to_string(code);
        if (!message.empty()) {
            out += ": ";
            out += message;
        }
        if (line >= 0) out += " (line " + std::to_string(line) + ")";
        if (index >= 0) out += " (index " + std::to_string(index) + ")";
        return out;
    }
};

inline Error make_error(ErrorCode code, std::string message = {}) {
    return Error{code, std::move(message)};
}

// Minimal expected-style result. Deliberately small: value_or / map chains
// are not needed here, call sites branch on ok().
template <typename T>
class Result {
public:
    Result(T value) : data_(std::move(value)) {}
    Result(Error error) : data_(std::move(error)) {}

    bool ok() const { return std::holds_alternative<T>(data_); }
    explicit operator bool() const { return ok(); }

    T& value() & { return std::get<T>(data_); }
    const T& value() const& { return std::get<T>(data_); }
    T&& value() && { return std::get<T>(std::move(data_)); }

    const Error& error() const { return std::get<Error>(data_); }

private:
    std::variant<T, Error> data_;
};

template <>
class Result<void> {
public:
    Result() = default;
    Result(Error error) : error_(std::move(error)) {}

    bool ok() const { return !error_.has_value(); }
    explicit operator bool() const { return ok(); }

    const Error& error() const { return *error_; }

private:
    std::optional<Error> error_;
};

inline Result<void> ok() { return Result<void>{}; }

}  // namespace hirec
