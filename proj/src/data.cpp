#include "auprobe/data.hpp"

#include "auprobe/error.hpp"
#include "auprobe/parallel.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace auprobe {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back().push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back().push_back(c);
        }
    }
    return fields;
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<long> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<long> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw DataError("malformed " + what + " entry '" + item + "'");
        out.push_back(v);
    }
    return out;
}

Tensor plane_of(const Tensor& t) {
    if (t.rank() == 2) return t;
    if (t.rank() == 3 && t.dim(0) == 1) return t.reshaped({t.dim(1), t.dim(2)});
    throw ShapeError("expected an [H,W] plane, got " + shape_string(t.shape()));
}

}  // namespace

std::filesystem::path Manifest::resolve(const ManifestRow& row) const {
    std::filesystem::path p(row.path);
    return p.is_absolute() ? p : base_dir / p;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest not found: " + path.string());
    Manifest manifest;
    manifest.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!header_seen) {
            if (trim(line) != kManifestHeader)
                throw DataError(where + ": expected header '" + std::string(kManifestHeader) + "'");
            header_seen = true;
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 6)
            throw DataError(where + ": expected 6 fields, found " + std::to_string(fields.size()));
        for (auto& f : fields) f = trim(f);
        ManifestRow row;
        row.path = fields[0];
        row.label = fields[1];
        row.subject = fields[3];
        row.sequence = fields[4];
        if (row.path.empty()) throw DataError(where + ": empty image path");
        if (row.label.empty()) throw DataError(where + ": empty label");
        try {
            for (long au : parse_int_list(fields[2], "aus")) {
                if (au <= 0) throw DataError("action unit ids must be positive, got " + std::to_string(au));
                row.aus.insert(static_cast<int>(au));
            }
            if (!fields[5].empty()) {
                const auto box = parse_int_list(fields[5], "crop");
                if (box.size() != 4) throw DataError("crop must be x0;y0;x1;y1");
                row.crop = CropBox{box[0], box[1], box[2], box[3]};
            }
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        const auto image_path = manifest.resolve(row);
        ImageInfo info;
        try {
            info = probe_image(image_path);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (row.crop) {
            const auto& c = *row.crop;
            if (c.x0 < 0 || c.y0 < 0 || c.x1 < c.x0 || c.y1 < c.y0 || c.x1 >= static_cast<long>(info.width) ||
                c.y1 >= static_cast<long>(info.height))
                throw DataError(where + ": crop box outside the " + std::to_string(info.width) + "x" +
                                std::to_string(info.height) + " image");
        }
        manifest.rows.push_back(std::move(row));
    }
    if (!header_seen) throw DataError(path.string() + ": empty manifest");
    return manifest;
}

std::string manifest_csv(const Manifest& manifest) {
    std::ostringstream out;
    out << kManifestHeader << '\n';
    for (const auto& row : manifest.rows) {
        std::string aus;
        for (int au : row.aus) aus += (aus.empty() ? "" : ";") + std::to_string(au);
        std::string crop;
        if (row.crop)
            crop = std::to_string(row.crop->x0) + ";" + std::to_string(row.crop->y0) + ";" +
                   std::to_string(row.crop->x1) + ";" + std::to_string(row.crop->y1);
        out << csv_field(row.path) << ',' << csv_field(row.label) << ',' << aus << ',' << csv_field(row.subject)
            << ',' << csv_field(row.sequence) << ',' << crop << '\n';
    }
    return out.str();
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    // Rewrite relative paths so they still resolve from the new location.
    Manifest rebased = manifest;
    const auto target_dir = std::filesystem::absolute(path).parent_path();
    for (auto& row : rebased.rows) {
        const auto abs = std::filesystem::absolute(manifest.resolve(row)).lexically_normal();
        row.path = abs.lexically_relative(target_dir).generic_string();
        if (row.path.empty()) row.path = abs.generic_string();
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << manifest_csv(rebased);
}

std::vector<std::string> label_set(const Manifest& manifest) {
    std::set<std::string> labels;
    for (const auto& row : manifest.rows) labels.insert(row.label);
    return {labels.begin(), labels.end()};
}

std::vector<int> au_set(const Manifest& manifest) {
    std::set<int> aus;
    for (const auto& row : manifest.rows) aus.insert(row.aus.begin(), row.aus.end());
    return {aus.begin(), aus.end()};
}

GrayImage load_row_image(const Manifest& manifest, std::size_t index) {
    const auto& row = manifest.rows.at(index);
    GrayImage image = read_image(manifest.resolve(row));
    if (!row.crop) return image;
    const auto& c = *row.crop;
    if (c.x1 >= static_cast<long>(image.width) || c.y1 >= static_cast<long>(image.height))
        throw DataError("crop box outside image " + row.path);
    GrayImage out(static_cast<std::size_t>(c.x1 - c.x0 + 1), static_cast<std::size_t>(c.y1 - c.y0 + 1));
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            out.at(x, y) = image.at(static_cast<std::size_t>(c.x0) + x, static_cast<std::size_t>(c.y0) + y);
    return out;
}

static real bilinear_zero(const Tensor& plane, double sx, double sy) {
    const auto h = static_cast<long>(plane.dim(0)), w = static_cast<long>(plane.dim(1));
    const double fx = std::floor(sx), fy = std::floor(sy);
    const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
    const double ax = sx - fx, ay = sy - fy;
    double acc = 0;
    for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
            const long x = x0 + dx, y = y0 + dy;
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            const double wgt = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
            acc += wgt * plane[static_cast<std::size_t>(y * w + x)];
        }
    }
    return static_cast<real>(acc);
}

Tensor rotate_bilinear(const Tensor& input, double degrees) {
    const Tensor plane = plane_of(input);
    const std::size_t h = plane.dim(0), w = plane.dim(1);
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = (static_cast<double>(w) - 1) / 2, cy = (static_cast<double>(h) - 1) / 2;
    Tensor out({h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            // inverse rotation maps the output pixel back into the source
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            out[y * w + x] = bilinear_zero(plane, sx, sy);
        }
    }
    return out;
}

Tensor flip_horizontal(const Tensor& input) {
    const Tensor plane = plane_of(input);
    const std::size_t h = plane.dim(0), w = plane.dim(1);
    Tensor out({h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out[y * w + x] = plane[y * w + (w - 1 - x)];
    return out;
}

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    const Tensor plane = plane_of(input);
    const std::size_t h = plane.dim(0), w = plane.dim(1);
    Tensor out({out_h, out_w});
    const double ry = static_cast<double>(h) / static_cast<double>(out_h);
    const double rx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double sy = std::clamp((static_cast<double>(y) + 0.5) * ry - 0.5, 0.0, static_cast<double>(h - 1));
        const auto y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double ay = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double sx = std::clamp((static_cast<double>(x) + 0.5) * rx - 0.5, 0.0, static_cast<double>(w - 1));
            const auto x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double ax = sx - static_cast<double>(x0);
            // Lerp form keeps equal neighbours exact, so constant planes stay constant.
            const double top = plane[y0 * w + x0] + ax * (plane[y0 * w + x1] - plane[y0 * w + x0]);
            const double bottom = plane[y1 * w + x0] + ax * (plane[y1 * w + x1] - plane[y1 * w + x0]);
            out[y * out_w + x] = static_cast<real>(top + ay * (bottom - top));
        }
    }
    return out;
}

Tensor crop(const Tensor& input, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
    const Tensor plane = plane_of(input);
    if (top + h > plane.dim(0) || left + w > plane.dim(1)) throw ShapeError("crop window exceeds plane");
    Tensor out({h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out[y * w + x] = plane[(top + y) * plane.dim(1) + left + x];
    return out;
}

Tensor standardize(const Tensor& input) {
    Tensor out = input;
    auto v = out.values();
    // A constant plane is all zeros exactly, without rounding residue from the mean.
    if (std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end()) {
        out.fill(0);
        return out;
    }
    const auto n = static_cast<real>(v.size());
    real mean = 0;
    for (auto x : v) mean += x;
    mean /= n;
    real var = 0;
    for (auto x : v) var += (x - mean) * (x - mean);
    var /= n;
    const real denom = std::max(std::sqrt(var), kStdFloor);
    for (auto& x : v) x = (x - mean) / denom;
    return out;
}

static void require_min_size(const GrayImage& image) {
    if (image.width < 8 || image.height < 8)
        throw DataError("image too small for the input transform: " + std::to_string(image.width) + "x" +
                        std::to_string(image.height));
}

Tensor augment(const GrayImage& image, std::mt19937_64& rng, std::size_t output_size) {
    require_min_size(image);
    std::uniform_real_distribution<double> angle(-kMaxRotationDegrees, kMaxRotationDegrees);
    std::bernoulli_distribution flip(0.5);
    std::uniform_int_distribution<std::size_t> offset(0, kResizeMargin);
    const double degrees = angle(rng);
    const bool do_flip = flip(rng);
    const std::size_t top = offset(rng);
    const std::size_t left = offset(rng);

    Tensor plane = rotate_bilinear(to_plane(image), degrees);
    if (do_flip) plane = flip_horizontal(plane);
    const std::size_t resized = output_size + kResizeMargin;
    plane = resize_bilinear(plane, resized, resized);
    plane = crop(plane, top, left, output_size, output_size);
    return standardize(plane).reshaped({1, output_size, output_size});
}

Tensor eval_transform(const GrayImage& image, std::size_t output_size) {
    require_min_size(image);
    const std::size_t resized = output_size + kResizeMargin;
    Tensor plane = resize_bilinear(to_plane(image), resized, resized);
    const std::size_t off = kResizeMargin / 2;
    plane = crop(plane, off, off, output_size, output_size);
    return standardize(plane).reshaped({1, output_size, output_size});
}

EvalGeometry EvalGeometry::for_image(std::size_t width, std::size_t height, std::size_t output_size) {
    const auto resized = static_cast<double>(output_size + kResizeMargin);
    EvalGeometry g;
    g.scale_x = resized / static_cast<double>(width);
    g.scale_y = resized / static_cast<double>(height);
    const auto off = static_cast<double>(kResizeMargin / 2);
    g.offset_x = 0.5 * g.scale_x - 0.5 - off;
    g.offset_y = 0.5 * g.scale_y - 0.5 - off;
    return g;
}

std::array<double, 2> EvalGeometry::map(double x, double y) const {
    return {x * scale_x + offset_x, y * scale_y + offset_y};
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

SplitResult split(const Manifest& manifest, std::size_t test_count, std::uint64_t seed) {
    if (test_count >= manifest.size())
        throw DataError("test_count " + std::to_string(test_count) + " must be smaller than the dataset (" +
                        std::to_string(manifest.size()) + " rows)");
    std::map<std::string, std::size_t> group_of;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& row = manifest.rows[i];
        const std::string key = row.sequence.empty() ? "#row" + std::to_string(i) : row.subject + '\x1f' + row.sequence;
        auto [it, inserted] = group_of.emplace(key, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    std::vector<std::size_t> order(groups.size());
    for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<bool> in_test(manifest.size(), false);
    std::size_t taken = 0;
    for (auto g : order) {
        if (taken == test_count) break;
        if (taken + groups[g].size() > test_count) continue;
        for (auto i : groups[g]) in_test[i] = true;
        taken += groups[g].size();
    }
    SplitResult result;
    result.train.base_dir = result.test.base_dir = manifest.base_dir;
    for (std::size_t i = 0; i < manifest.size(); ++i)
        (in_test[i] ? result.test : result.train).rows.push_back(manifest.rows[i]);
    return result;
}

std::vector<Example> load_examples(const Manifest& manifest, const std::vector<std::string>& labels,
                                   std::size_t threads) {
    std::vector<Example> examples(manifest.size());
    parallel_for(manifest.size(), threads, [&](std::size_t i) {
        const auto& row = manifest.rows[i];
        const auto it = std::find(labels.begin(), labels.end(), row.label);
        if (it == labels.end()) throw DataError("label '" + row.label + "' of " + row.path + " is not a known class");
        examples[i].image = load_row_image(manifest, i);
        examples[i].label = static_cast<std::size_t>(it - labels.begin());
    });
    return examples;
}

std::vector<Tensor> eval_inputs(const Manifest& manifest, std::size_t output_size, std::size_t threads) {
    std::vector<Tensor> inputs(manifest.size());
    parallel_for(manifest.size(), threads,
                 [&](std::size_t i) { inputs[i] = eval_transform(load_row_image(manifest, i), output_size); });
    return inputs;
}

}  // namespace auprobe
