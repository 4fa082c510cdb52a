#pragma once

#include <stdexcept>
#include <string>

namespace bms {

enum class ErrorKind {
    precondition,
    invalid_keyword,
    config,
    planner,
    provider,
    transcript_miss,
    not_found,
    parse,
    source_unavailable,
    executor,
    harness,
    scoring,
    usage,
    io,
    degenerate_vector,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace bms
