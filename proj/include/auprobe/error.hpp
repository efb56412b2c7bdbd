#pragma once

#include <stdexcept>
#include <string>

namespace auprobe {

/// Shape or argument contract violated by the caller.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad input data: missing files, malformed rows, undecodable images, corrupt checkpoints.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during training or analysis.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration file or option value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace auprobe
