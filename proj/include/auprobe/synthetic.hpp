#pragma once

#include "auprobe/data.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace auprobe {

/// Geometric stencils standing in for localized facial action units.
enum class Glyph { horizontal_bar, vertical_bar, arc_up, arc_down, cross, dot_pair, chevron, ring };

std::string to_string(Glyph glyph);
Glyph parse_glyph(const std::string& name);
/// size x size stencil with values in [0,1], as a [size,size] tensor.
Tensor glyph_stencil(Glyph glyph, std::size_t size);

/// Inclusive pixel rectangle.
struct Region {
    long x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    long width() const { return x1 - x0 + 1; }
    long height() const { return y1 - y0 + 1; }
    bool intersects(const Region& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
    friend bool operator==(const Region&, const Region&) = default;
};

struct UnitSpec {
    int id = 0;
    Glyph glyph = Glyph::horizontal_bar;
    Region region;
};

struct ClassRule {
    std::string name;
    std::vector<int> units;
};

struct SyntheticSpec {
    std::size_t canvas_size = 48;
    std::size_t glyph_size = 11;
    std::vector<UnitSpec> units;
    std::vector<ClassRule> classes;
    std::size_t samples_per_class = 100;
    long position_jitter = 4;      // pixels, uniform in [-j, j] around the region center
    double intensity_jitter = 20;  // foreground level, uniform in [-j, j]
    double noise_std = 8;          // per-pixel Gaussian noise
    double background = 40;
    double foreground = 210;
    std::uint64_t seed = 1;

    /// Throws DataError on undefined units or regions outside the canvas.
    /// Returns warnings (overlapping placement regions).
    std::vector<std::string> validate() const;
    const UnitSpec& unit(int id) const;
};

/// Four units in the canvas quadrants; four classes of 100 samples, each
/// showing all units but one; canvas 48.
SyntheticSpec default_synthetic_spec();
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void save_synthetic_spec(const SyntheticSpec& spec, const std::filesystem::path& path);

struct Placement {
    std::size_t row = 0;  // manifest row
    int unit = 0;
    long x = 0, y = 0;    // top-left corner of the stencil
};

struct SyntheticDataset {
    Manifest manifest;
    std::vector<Placement> placements;
    std::vector<std::string> warnings;
};

/// Renders every sample to `<out_dir>/images/*.pgm` and writes `manifest.csv`
/// and `placements.csv`. Each sample uses a generator derived from
/// (seed, class, sample), so output is bit-reproducible.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Reads placements.csv back (rows are matched by path against `manifest`).
std::vector<Placement> load_placements(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace auprobe
