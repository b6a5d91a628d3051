#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace llps {

// Malformed input: missing files, schema mismatches, contract violations.
// The CLI maps this to its "data error" exit code.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string format_double(double v, int precision = 17) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return std::string(buf);
}

}  // namespace llps
