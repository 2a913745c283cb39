#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace imputad {

// Every failure surfaced by the library carries a short machine-readable
// code next to the human message. The CLI turns both into a JSON object.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace imputad
