#include "auprobe/numfmt.hpp"

#include "auprobe/error.hpp"

#include <array>
#include <charconv>

namespace auprobe {

namespace {

template <typename T>
std::string shortest(T value) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) throw NumericError("cannot format value");
    return std::string(buf.data(), end);
}

}  // namespace

std::string format_real(double value) { return shortest(value); }
std::string format_real(float value) { return shortest(value); }

real parse_real(const std::string& text) {
    real value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) throw DataError("malformed number '" + text + "'");
    return value;
}

}  // namespace auprobe
