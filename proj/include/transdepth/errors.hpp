#pragma once

#include <stdexcept>
#include <string>

namespace td {

// Shape/dimension mismatches (bad matmul dims, indivisible strides, ...).
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// Domain violations: log of non-positive values, NaN/Inf appearing in an op
// output, empty pixel sets, and similar numeric preconditions.
class ValueError : public std::runtime_error {
public:
    explicit ValueError(const std::string& msg) : std::runtime_error("value error: " + msg) {}
};

// Bad or unknown configuration keys/values.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// File ingestion and serialization failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

}  // namespace td
