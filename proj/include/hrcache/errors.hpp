#pragma once

#include <stdexcept>
#include <string>

namespace hrcache {

// Bad invocation: unknown flags, malformed config, impossible parameter combos.
// The CLI maps this to exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data: malformed trace lines, size conflicts, empty windows.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hrcache
