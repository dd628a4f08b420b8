#pragma once

#include <stdexcept>
#include <string>

namespace craml {

// Usage errors map to exit code 1, everything else to 2.
enum class ErrorKind { usage, data, io, state };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_data(const std::string& message) {
    throw Error(ErrorKind::data, message);
}

[[noreturn]] inline void fail_io(const std::string& message) {
    throw Error(ErrorKind::io, message);
}

[[noreturn]] inline void fail_usage(const std::string& message) {
    throw Error(ErrorKind::usage, message);
}

[[noreturn]] inline void fail_state(const std::string& message) {
    throw Error(ErrorKind::state, message);
}

}  // namespace craml
