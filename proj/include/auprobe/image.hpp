#pragma once

#include "auprobe/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace auprobe {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct ImageInfo {
    std::size_t width = 0;
    std::size_t height = 0;
};

// PGM (P5 binary or P2 ascii) and PNG are recognized by their magic bytes.
GrayImage read_image(const std::filesystem::path& path);
/// Picks the encoder from the extension: .png, otherwise PGM.
void write_image(const GrayImage& image, const std::filesystem::path& path);
/// Reads only the header. Throws DataError when the file is missing or not a supported image.
ImageInfo probe_image(const std::filesystem::path& path);

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_png(const std::filesystem::path& path);
void write_png(const GrayImage& image, const std::filesystem::path& path);

/// Image pixels as a [H,W] tensor of values in [0,255].
Tensor to_plane(const GrayImage& image);
/// Min-max normalization of a [H,W] or [1,H,W] tensor to 0..255. A constant tensor maps to 0.
GrayImage normalize_to_gray(const Tensor& plane);

}  // namespace auprobe
