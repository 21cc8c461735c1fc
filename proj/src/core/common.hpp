#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace avatar {

enum class ErrorCategory {
    invalid_argument,  // bad shapes, bad values, contract violations
    domain,            // math domain violation (log of non-positive, ...)
    io,                // file system / parse failures
    state,             // operation not valid in current state
    diverged,          // training produced a non-finite loss
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
    if (!condition) fail(category, message);
}

}  // namespace avatar
