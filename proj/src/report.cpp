#include "auprobe/report.hpp"

#include "auprobe/checkpoint.hpp"
#include "auprobe/error.hpp"
#include "auprobe/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace fs = std::filesystem;

namespace auprobe {

namespace {

void fill_rect(GrayImage& img, std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1, std::uint8_t v) {
    for (std::size_t y = y0; y < y1 && y < img.height; ++y)
        for (std::size_t x = x0; x < x1 && x < img.width; ++x) img.at(x, y) = v;
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

/// Pastes cells into a grid with a 2-pixel white border around each.
GrayImage tile(const std::vector<GrayImage>& cells, std::size_t cell_w, std::size_t cell_h) {
    constexpr std::size_t gap = 2;
    const std::size_t n = cells.size();
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const std::size_t rows = (n + cols - 1) / cols;
    GrayImage grid(cols * (cell_w + gap) + gap, rows * (cell_h + gap) + gap, 255);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ox = gap + (i % cols) * (cell_w + gap), oy = gap + (i / cols) * (cell_h + gap);
        for (std::size_t y = 0; y < cells[i].height; ++y)
            for (std::size_t x = 0; x < cells[i].width; ++x) grid.at(ox + x, oy + y) = cells[i].at(x, y);
    }
    return grid;
}

void check_db(const ActivationDB& db, const Network& net, const Manifest& manifest) {
    verify_provenance(db, network_fingerprint(net), manifest_fingerprint(manifest));
    if (db.num_images() != manifest.size()) throw DataError("activation DB and manifest differ in size");
}

std::vector<std::size_t> all_ids(std::size_t count) {
    std::vector<std::size_t> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = i;
    return ids;
}

struct Response {
    Tensor input;
    Tensor projection;
    PixelRect rf;
};

Response respond(const Network& net, const Manifest& manifest, const ActivationRecord& rec, std::size_t tap) {
    const auto size = net.input_shape().at(1);
    Response r;
    r.input = eval_transform(load_row_image(manifest, rec.image_id), size);
    const auto trace = net.forward(r.input);
    r.projection = project(trace, net, tap, rec.map, rec.row, rec.col);
    r.rf = receptive_field(net, tap, rec.row, rec.col);
    return r;
}

}  // namespace

GrayImage render_profile_chart(const AUDistanceProfile& profile, const ChartLayout& layout) {
    const std::size_t maps = profile.distances.size();
    if (maps == 0) throw ShapeError("cannot plot an empty profile");
    if (profile.argmax_map >= maps) throw ShapeError("profile argmax outside the map range");
    GrayImage img(layout.width(maps), layout.height(), kChartBackground);

    // Axes.
    fill_rect(img, layout.left - 2, layout.top, layout.left - 1, layout.baseline() + 1, 0);
    fill_rect(img, layout.left - 2, layout.baseline(), img.width - layout.right + 1, layout.baseline() + 1, 0);
    // Ticks every 32 maps below the axis.
    for (std::size_t m = 0; m < maps; m += 32)
        fill_rect(img, layout.bar_x(m), layout.baseline() + 1, layout.bar_x(m) + 1, layout.baseline() + 5, 0);

    const double peak = std::max(0.0, profile.max_distance());
    for (std::size_t m = 0; m < maps; ++m) {
        const double d = std::isfinite(profile.distances[m]) ? std::max(0.0, profile.distances[m]) : 0.0;
        auto h = peak > 0 ? static_cast<std::size_t>(std::lround(d / peak * double(layout.plot_height))) : 0;
        h = std::clamp<std::size_t>(h, 1, layout.plot_height);
        const std::uint8_t shade = m == profile.argmax_map ? kChartArgmax : kChartBar;
        fill_rect(img, layout.bar_x(m), layout.baseline() - h, layout.bar_x(m) + layout.bar_width, layout.baseline(),
                  shade);
    }
    // Marker: small downward triangle over the argmax bar.
    const std::size_t cx = layout.bar_x(profile.argmax_map) + layout.bar_width / 2;
    for (std::size_t row = 0; row < 5; ++row) {
        const std::size_t y = layout.top - 8 + row, half = 4 - row;
        fill_rect(img, cx >= half ? cx - half : 0, y, cx + half + 1, y + 1, kChartArgmax);
    }
    return img;
}

ProfileFiles plot_profile(const AUDistanceProfile& profile, const fs::path& png_path) {
    ProfileFiles files{png_path, fs::path(png_path).replace_extension(".csv")};
    ensure_parent(png_path);
    write_png(render_profile_chart(profile), files.png);
    write_profile_csv(profile, files.csv);
    return files;
}

MontageResult montage(const ActivationDB& db, const Network& net, const Manifest& manifest, std::size_t map,
                      std::size_t n, const fs::path& out_dir) {
    check_db(db, net, manifest);
    if (map >= db.num_maps()) throw ShapeError("map " + std::to_string(map) + " outside the harvested layer");
    if (n == 0) throw std::invalid_argument("montage: n must be positive");
    const std::size_t tap = db.provenance().tap;
    const auto top = top_n(db, map, all_ids(db.num_images()), n);

    MontageResult result;
    if (top.size() < n)
        result.warnings.push_back("map " + std::to_string(map) + ": only " + std::to_string(top.size()) +
                                  " images available for a montage of " + std::to_string(n));
    const PixelRect full = receptive_field(net, tap, 0, 0, false);
    const auto cell_w = static_cast<std::size_t>(full.width()), cell_h = static_cast<std::size_t>(full.height());

    std::vector<GrayImage> originals, responses;
    for (const auto& rec : top) {
        const auto r = respond(net, manifest, rec, tap);
        originals.push_back(normalize_to_gray(crop_rect(r.input, r.rf)));
        responses.push_back(normalize_to_gray(crop_rect(r.projection, r.rf)));
        result.image_ids.push_back(rec.image_id);
    }
    fs::create_directories(out_dir);
    const std::string stem = "map_" + std::to_string(map);
    result.original = out_dir / (stem + "_orig.png");
    result.deconvolution = out_dir / (stem + "_deconv.png");
    write_png(tile(originals, cell_w, cell_h), result.original);
    write_png(tile(responses, cell_w, cell_h), result.deconvolution);
    return result;
}

std::vector<SummaryEntry> au_summary(const std::vector<AUDistanceProfile>& profiles, const ActivationDB& db,
                                     const Network* net, const Manifest& manifest, const fs::path& out_dir,
                                     std::size_t montage_n) {
    if (net) check_db(db, *net, manifest);
    const std::size_t tap = db.provenance().tap;
    std::vector<SummaryEntry> entries;
    std::map<std::size_t, MontageResult> montages;

    for (const auto& p : profiles) {
        SummaryEntry e{p.au, p.argmax_map, p.max_distance(), p.n_used, {}};
        const std::string au = "au_" + std::to_string(p.au);
        const auto files = plot_profile(p, out_dir / "profiles" / (au + ".png"));
        e.files.push_back(fs::relative(files.csv, out_dir));
        e.files.push_back(fs::relative(files.png, out_dir));
        if (!net) {
            entries.push_back(std::move(e));
            continue;
        }

        auto it = montages.find(p.argmax_map);
        if (it == montages.end())
            it = montages.emplace(p.argmax_map, montage(db, *net, manifest, p.argmax_map, montage_n, out_dir / "montages"))
                     .first;
        e.files.push_back(fs::relative(it->second.original, out_dir));
        e.files.push_back(fs::relative(it->second.deconvolution, out_dir));

        const auto& present = p.top_present.at(p.argmax_map);
        if (!present.empty()) {
            const auto& rec = db.record(present.front(), p.argmax_map);
            const auto r = respond(*net, manifest, rec, tap);
            const auto images = render_response(r.projection, r.rf, r.input, out_dir / "summary" / (au + "_exemplar"));
            e.files.push_back(fs::relative(images.original, out_dir));
            e.files.push_back(fs::relative(images.deconvolution, out_dir));
        }
        entries.push_back(std::move(e));
    }

    fs::create_directories(out_dir / "summary");
    std::ofstream index(out_dir / "summary" / "index.csv", std::ios::binary);
    if (!index) throw DataError("cannot write " + (out_dir / "summary" / "index.csv").string());
    index << "au,argmax_map,distance,n_used,file\n";
    for (const auto& e : entries)
        for (const auto& f : e.files) {
            if (!fs::exists(out_dir / f)) throw DataError("report file missing after write: " + f.string());
            index << e.au << ',' << e.argmax_map << ',' << format_real(e.distance) << ',' << e.n_used << ','
                  << f.generic_string() << '\n';
        }
    return entries;
}

}  // namespace auprobe
