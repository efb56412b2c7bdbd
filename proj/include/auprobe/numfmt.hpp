#pragma once

#include "auprobe/tensor.hpp"

#include <string>

namespace auprobe {

/// Shortest decimal text that round-trips to the same value.
std::string format_real(double value);
std::string format_real(float value);
/// Throws DataError on malformed text.
real parse_real(const std::string& text);

}  // namespace auprobe
