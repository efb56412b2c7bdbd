#pragma once

#include "auprobe/network.hpp"

#include <filesystem>
#include <string>

namespace auprobe {

inline constexpr int kCheckpointVersion = 1;

/// Checkpoint layout: one line of JSON (format version, precision, layer list,
/// tensor names and shapes, config echo, class labels), then the raw
/// little-endian IEEE-754 parameter buffers in the declared tensor order.
std::string serialize_checkpoint(const Network& net);
Network deserialize_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);
/// Loads and checks that every layer matches the network `expected` would build.
Network load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// FNV-1a 64 of the serialized checkpoint, as 16 hex digits.
std::string network_fingerprint(const Network& net);

std::string fnv1a_hex(std::string_view bytes);
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace auprobe
