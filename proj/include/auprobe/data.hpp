#pragma once

#include "auprobe/image.hpp"
#include "auprobe/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace auprobe {

/// Face box in source pixel coordinates, inclusive corners (x0;y0;x1;y1).
struct CropBox {
    long x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    friend bool operator==(const CropBox&, const CropBox&) = default;
};

struct ManifestRow {
    std::string path;  // as written in the CSV
    std::string label;
    std::set<int> aus;
    std::string subject;
    std::string sequence;
    std::optional<CropBox> crop;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

/// Image list with expression labels and action-unit sets.
/// Relative image paths resolve against base_dir.
struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRow> rows;

    std::filesystem::path resolve(const ManifestRow& row) const;
    std::size_t size() const { return rows.size(); }
};

inline constexpr const char* kManifestHeader = "path,label,aus,subject,sequence,crop";

/// Parses and validates a manifest CSV. Every image must exist and carry a
/// readable header; errors name the offending line.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
/// Canonical CSV text of a manifest (paths as stored).
std::string manifest_csv(const Manifest& manifest);

/// Sorted distinct expression labels; the class index of a label is its position here.
std::vector<std::string> label_set(const Manifest& manifest);
/// Sorted distinct action units present anywhere in the manifest.
std::vector<int> au_set(const Manifest& manifest);

/// Decodes a row's image and applies its crop box.
GrayImage load_row_image(const Manifest& manifest, std::size_t row);

// Augmentation and evaluation transforms. The intermediate resize target is
// output_size + 3 (99 for the default 96 input).
inline constexpr std::size_t kResizeMargin = 3;
inline constexpr real kStdFloor = real(1e-6);
inline constexpr double kMaxRotationDegrees = 15.0;

/// Random rotation in [-15, 15] degrees, horizontal flip with probability 0.5,
/// bilinear resize to (size+3)^2, random size^2 crop, per-image standardization.
Tensor augment(const GrayImage& image, std::mt19937_64& rng, std::size_t output_size = 96);
/// Deterministic: resize to (size+3)^2, center crop, standardize.
Tensor eval_transform(const GrayImage& image, std::size_t output_size = 96);

// Building blocks, exposed for testing. Planes are [H,W] tensors.
Tensor rotate_bilinear(const Tensor& plane, double degrees);
Tensor flip_horizontal(const Tensor& plane);
Tensor resize_bilinear(const Tensor& plane, std::size_t out_h, std::size_t out_w);
Tensor crop(const Tensor& plane, std::size_t top, std::size_t left, std::size_t h, std::size_t w);
/// Subtract the mean and divide by max(std, 1e-6). Population standard deviation.
Tensor standardize(const Tensor& plane);

/// Maps a source-pixel coordinate to eval_transform output coordinates.
struct EvalGeometry {
    double scale_x = 1, scale_y = 1, offset_x = 0, offset_y = 0;
    static EvalGeometry for_image(std::size_t width, std::size_t height, std::size_t output_size);
    std::array<double, 2> map(double x, double y) const;
};

/// Generator for augmentation of one image, derived from (run seed, epoch, image index)
/// so serial and parallel execution agree.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

struct SplitResult {
    Manifest train;
    Manifest test;
};

/// Disjoint, reproducible split that keeps every sequence on one side.
/// Whole sequences are moved to the test side in seeded order while they fit.
SplitResult split(const Manifest& manifest, std::size_t test_count, std::uint64_t seed);

struct Example {
    GrayImage image;
    std::size_t label = 0;
};

/// Decoded examples with class indices taken from `labels`.
std::vector<Example> load_examples(const Manifest& manifest, const std::vector<std::string>& labels,
                                   std::size_t threads = 1);
/// eval_transform of every row, in row order.
std::vector<Tensor> eval_inputs(const Manifest& manifest, std::size_t output_size, std::size_t threads = 1);

}  // namespace auprobe
