#include "auprobe/error.hpp"
#include "auprobe/report.hpp"

#include "support/scratch.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace auprobe;
namespace fs = std::filesystem;

namespace {

AUDistanceProfile flat_profile(std::size_t maps, double value) {
    AUDistanceProfile p;
    p.au = 1;
    p.distances.assign(maps, value);
    p.argmax_map = argmax_first(p.distances);
    return p;
}

std::size_t count_runs(const GrayImage& img, std::size_t y, std::uint8_t shade) {
    std::size_t runs = 0;
    for (std::size_t x = 0; x < img.width; ++x)
        if (img.at(x, y) == shade && (x == 0 || img.at(x - 1, y) != shade)) ++runs;
    return runs;
}

struct Scene {
    Manifest manifest;
    Network net;
    ActivationDB db;
};

// Random-noise images on disk, a small untrained network and its harvest.
Scene make_scene(const fs::path& dir, std::size_t images) {
    Scene s;
    s.manifest.base_dir = dir;
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> px(0, 255);
    for (std::size_t i = 0; i < images; ++i) {
        GrayImage img(20, 20, 0);
        for (auto& p : img.pixels) p = std::uint8_t(px(rng));
        const std::string name = "img" + std::to_string(i) + ".png";
        write_png(img, dir / name);
        std::set<int> aus;
        if (i % 3 == 0) aus.insert(5);
        if (i % 2 == 0) aus.insert(6);
        s.manifest.rows.push_back(ManifestRow{name, "a", aus, "", "", std::nullopt});
    }
    ModelConfig c;
    c.input_size = 24;
    c.conv_channels = {2, 3};
    c.fc_hidden = 4;
    c.num_classes = 2;
    s.net = build(c);
    s.db = harvest(s.net, s.manifest);
    return s;
}

}  // namespace

TEST_CASE("chart draws one bar per map and marks the argmax") {
    AUDistanceProfile p = flat_profile(256, 0);
    p.distances[100] = 2;
    p.distances[40] = 1;
    p.argmax_map = 100;
    const ChartLayout layout;
    const GrayImage img = render_profile_chart(p, layout);
    CHECK(img.width == layout.width(256));
    CHECK(img.height == layout.height());

    // Every map has a visible bar on the row above the axis.
    const std::size_t y = layout.baseline() - 1;
    CHECK(count_runs(img, y, kChartBar) == 255);
    CHECK(img.at(layout.bar_x(100), y) == kChartArgmax);
    // Bar heights scale with distance: map 40 reaches half of the plot.
    CHECK(img.at(layout.bar_x(40), layout.baseline() - 100) == kChartBar);
    CHECK(img.at(layout.bar_x(40), layout.baseline() - 101) == kChartBackground);
    CHECK(img.at(layout.bar_x(100), layout.top) == kChartArgmax);
    // Marker row directly above the argmax bar.
    CHECK(img.at(layout.bar_x(100) + 1, layout.top - 4) == kChartArgmax);
    CHECK(img.at(layout.bar_x(40) + 1, layout.top - 4) == kChartBackground);
}

TEST_CASE("an all-zero profile still plots and marks map 0") {
    const AUDistanceProfile p = flat_profile(10, 0);
    const ChartLayout layout;
    const GrayImage img = render_profile_chart(p, layout);
    const std::size_t y = layout.baseline() - 1;
    CHECK(img.at(layout.bar_x(0), y) == kChartArgmax);
    CHECK(count_runs(img, y, kChartBar) == 9);
    CHECK(img.at(layout.bar_x(0) + 1, layout.top - 4) == kChartArgmax);
    CHECK_THROWS_AS(render_profile_chart(flat_profile(0, 0)), ShapeError);
}

TEST_CASE("plot_profile writes a decodable PNG and the CSV beside it") {
    testing::ScratchDir dir("plot");
    AUDistanceProfile p = flat_profile(5, 0.5);
    p.distances[3] = 1;
    p.argmax_map = 3;
    const ProfileFiles f = plot_profile(p, dir / "sub" / "au_1.png");
    CHECK(f.csv == dir / "sub" / "au_1.csv");
    const GrayImage img = read_png(f.png);
    CHECK(img.width == ChartLayout{}.width(5));
    std::ifstream in(f.csv);
    std::string first;
    std::getline(in, first);
    CHECK(first == "map,distance");
}

TEST_CASE("montage tiles receptive-field crops of the top images") {
    testing::ScratchDir dir("montage");
    const Scene s = make_scene(dir.path(), 6);
    const MontageResult m = montage(s.db, s.net, s.manifest, 1, 4, dir / "out");
    CHECK(m.image_ids.size() == 4);
    CHECK(m.warnings.empty());
    const GrayImage orig = read_png(m.original), dec = read_png(m.deconvolution);
    const PixelRect cell = receptive_field(s.net, s.db.provenance().tap, 0, 0, false);
    // 2x2 grid with 2 px gutters around and between cells.
    CHECK(orig.width == 2 * std::size_t(cell.width()) + 3 * 2);
    CHECK(orig.height == 2 * std::size_t(cell.height()) + 3 * 2);
    CHECK(dec.width == orig.width);
    CHECK(m.original.filename() == "map_1_orig.png");

    const MontageResult short_montage = montage(s.db, s.net, s.manifest, 0, 9, dir / "out");
    CHECK(short_montage.image_ids.size() == 6);
    CHECK(short_montage.warnings.size() == 1);

    Manifest other = s.manifest;
    other.rows[0].aus.insert(42);
    CHECK_THROWS_AS(montage(s.db, s.net, other, 0, 4, dir / "out"), DataError);
}

TEST_CASE("au_summary lists every written file in its index") {
    testing::ScratchDir dir("summary");
    const Scene s = make_scene(dir.path(), 9);
    const auto profiles = profile_all(s.db, s.manifest, {5, 6}, 3);
    const fs::path out = dir / "report";
    const auto entries = au_summary(profiles, s.db, &s.net, s.manifest, out, 4);
    REQUIRE(entries.size() == 2);
    std::size_t files = 0;
    for (const auto& e : entries) {
        CHECK(e.files.size() == 6);
        for (const auto& f : e.files) CHECK(fs::exists(out / f));
        files += e.files.size();
    }
    std::ifstream index(out / "summary" / "index.csv");
    std::vector<std::string> lines;
    for (std::string l; std::getline(index, l);) lines.push_back(l);
    CHECK(lines.front() == "au,argmax_map,distance,n_used,file");
    CHECK(lines.size() == files + 1);
    CHECK(fs::exists(out / "summary" / "au_5_exemplar_orig.png"));
    CHECK(fs::exists(out / "summary" / "au_6_exemplar_deconv.png"));

    // Without a network only the profiles are produced.
    const auto bare = au_summary(profiles, s.db, nullptr, s.manifest, dir / "bare", 4);
    CHECK(bare[0].files.size() == 2);
    CHECK(!fs::exists(dir / "bare" / "montages"));
}
