#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lisgan {

// Error taxonomy. The CLI maps these onto process exit codes, so the
// classification (config / numeric / io) is part of the public contract.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatches are programming/config errors; they carry the offending
// layer name and both shapes in the message.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool is_finite(float v) { return std::isfinite(v); }
inline bool is_finite(double v) { return std::isfinite(v); }

} // namespace lisgan
