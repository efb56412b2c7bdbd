#pragma once

#include "auprobe/association.hpp"
#include "auprobe/deconv.hpp"
#include "auprobe/harvest.hpp"
#include "auprobe/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace auprobe {

/// Pixel layout of a profile chart: one bar per map, `bar_width` wide with a
/// one-pixel gap, standing on the axis row `baseline`.
struct ChartLayout {
    std::size_t bar_width = 3;
    std::size_t left = 24, right = 8, top = 16, bottom = 16;
    std::size_t plot_height = 200;

    std::size_t pitch() const { return bar_width + 1; }
    std::size_t width(std::size_t maps) const { return left + maps * pitch() + right; }
    std::size_t height() const { return top + plot_height + 1 + bottom; }
    std::size_t baseline() const { return top + plot_height; }
    std::size_t bar_x(std::size_t map) const { return left + map * pitch(); }
};

inline constexpr std::uint8_t kChartBackground = 255;
inline constexpr std::uint8_t kChartBar = 150;
inline constexpr std::uint8_t kChartArgmax = 0;

/// Bar chart of distance per map. Every bar is at least one pixel tall so all
/// maps are visible; the argmax bar is drawn black with a marker above it.
GrayImage render_profile_chart(const AUDistanceProfile& profile, const ChartLayout& layout = {});

struct ProfileFiles {
    std::filesystem::path png;
    std::filesystem::path csv;
};

/// Writes the chart to `png_path` and the profile CSV next to it.
ProfileFiles plot_profile(const AUDistanceProfile& profile, const std::filesystem::path& png_path);

struct MontageResult {
    std::filesystem::path original;
    std::filesystem::path deconvolution;
    std::vector<std::size_t> image_ids;
    std::vector<std::string> warnings;
};

/// Receptive-field crops of the map's top-n images and their deconvolution
/// responses, tiled in square-ish grids (3x3 for n=9), written as
/// `<out_dir>/map_<id>_orig.png` and `<out_dir>/map_<id>_deconv.png`.
MontageResult montage(const ActivationDB& db, const Network& net, const Manifest& manifest, std::size_t map,
                      std::size_t n, const std::filesystem::path& out_dir);

struct SummaryEntry {
    int au = 0;
    std::size_t argmax_map = 0;
    double distance = 0;
    std::size_t n_used = 0;
    std::vector<std::filesystem::path> files;  // relative to the output directory
};

/// Per AU: profile CSV and chart, the argmax map's montage, and an exemplar
/// (top AU-present image) crop with its deconvolution. Without a network only
/// the profiles are written. Writes summary/index.csv listing only files that exist.
std::vector<SummaryEntry> au_summary(const std::vector<AUDistanceProfile>& profiles, const ActivationDB& db,
                                     const Network* net, const Manifest& manifest,
                                     const std::filesystem::path& out_dir, std::size_t montage_n = 9);

}  // namespace auprobe
