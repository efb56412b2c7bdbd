#include "auprobe/synthetic.hpp"

#include "auprobe/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace auprobe {

using json = nlohmann::json;

namespace {

const std::vector<std::pair<Glyph, std::string>>& glyph_names() {
    static const std::vector<std::pair<Glyph, std::string>> names{
        {Glyph::horizontal_bar, "horizontal_bar"}, {Glyph::vertical_bar, "vertical_bar"},
        {Glyph::arc_up, "arc_up"},                 {Glyph::arc_down, "arc_down"},
        {Glyph::cross, "cross"},                   {Glyph::dot_pair, "dot_pair"},
        {Glyph::chevron, "chevron"},               {Glyph::ring, "ring"}};
    return names;
}

}  // namespace

std::string to_string(Glyph glyph) {
    for (const auto& [g, name] : glyph_names())
        if (g == glyph) return name;
    return "unknown";
}

Glyph parse_glyph(const std::string& name) {
    for (const auto& [g, n] : glyph_names())
        if (n == name) return g;
    throw DataError("unknown glyph '" + name + "'");
}

Tensor glyph_stencil(Glyph glyph, std::size_t size) {
    if (size < 5) throw DataError("glyph size must be at least 5");
    Tensor s({size, size});
    const double c = (static_cast<double>(size) - 1) / 2;
    const double r = c;             // half extent
    const double t = std::max(1.0, static_cast<double>(size) / 8);  // half stroke width
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) - c, dy = static_cast<double>(y) - c;
            const double dist = std::hypot(dx, dy);
            bool on = false;
            switch (glyph) {
                case Glyph::horizontal_bar: on = std::abs(dy) <= t; break;
                case Glyph::vertical_bar: on = std::abs(dx) <= t; break;
                case Glyph::arc_up: on = dy <= 0.5 && std::abs(dist - r * 0.8) <= t; break;
                case Glyph::arc_down: on = dy >= -0.5 && std::abs(dist - r * 0.8) <= t; break;
                case Glyph::cross: on = std::abs(dx - dy) <= t || std::abs(dx + dy) <= t; break;
                case Glyph::dot_pair: on = std::hypot(std::abs(dx) - r * 0.6, dy) <= t * 1.6; break;
                case Glyph::chevron: on = dy >= -r * 0.5 && std::abs(dy + r * 0.5 - std::abs(dx)) <= t; break;
                case Glyph::ring: on = std::abs(dist - r * 0.75) <= t; break;
            }
            s[y * size + x] = on ? real(1) : real(0);
        }
    }
    return s;
}

std::vector<std::string> SyntheticSpec::validate() const {
    if (canvas_size < 8) throw DataError("canvas_size must be at least 8");
    if (glyph_size < 5 || glyph_size > canvas_size) throw DataError("glyph_size must be in [5, canvas_size]");
    if (units.empty()) throw DataError("synthetic spec defines no units");
    if (classes.empty()) throw DataError("synthetic spec defines no classes");
    if (samples_per_class == 0) throw DataError("samples_per_class must be positive");
    if (position_jitter < 0 || intensity_jitter < 0 || noise_std < 0) throw DataError("jitter must be >= 0");
    const auto canvas = static_cast<long>(canvas_size);
    const auto glyph = static_cast<long>(glyph_size);
    std::map<int, const UnitSpec*> seen;
    for (const auto& u : units) {
        if (u.id <= 0) throw DataError("unit ids must be positive");
        if (!seen.emplace(u.id, &u).second) throw DataError("duplicate unit id " + std::to_string(u.id));
        const auto& g = u.region;
        if (g.x0 < 0 || g.y0 < 0 || g.x1 >= canvas || g.y1 >= canvas || g.x1 < g.x0 || g.y1 < g.y0)
            throw DataError("region of unit " + std::to_string(u.id) + " lies outside the canvas");
        if (g.width() < glyph || g.height() < glyph)
            throw DataError("region of unit " + std::to_string(u.id) + " is smaller than the glyph");
    }
    std::set<std::string> names;
    for (const auto& rule : classes) {
        if (rule.name.empty() || !names.insert(rule.name).second)
            throw DataError("class names must be unique and non-empty");
        for (int id : rule.units)
            if (!seen.count(id))
                throw DataError("class " + rule.name + " references undefined unit " + std::to_string(id));
    }
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < units.size(); ++i)
        for (std::size_t j = i + 1; j < units.size(); ++j)
            if (units[i].region.intersects(units[j].region))
                warnings.push_back("placement regions of units " + std::to_string(units[i].id) + " and " +
                                   std::to_string(units[j].id) + " overlap; their glyphs may be indistinguishable");
    return warnings;
}

const UnitSpec& SyntheticSpec::unit(int id) const {
    for (const auto& u : units)
        if (u.id == id) return u;
    throw DataError("undefined unit " + std::to_string(id));
}

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    spec.units = {{1, Glyph::horizontal_bar, {0, 0, 23, 23}},
                  {2, Glyph::ring, {24, 0, 47, 23}},
                  {3, Glyph::cross, {0, 24, 23, 47}},
                  {4, Glyph::arc_down, {24, 24, 47, 47}}};
    // Each class omits one unit, so every unit appears both with and without
    // each other unit.
    spec.classes = {{"A", {1, 2, 3}}, {"B", {2, 3, 4}}, {"C", {1, 3, 4}}, {"D", {1, 2, 4}}};
    return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("synthetic spec not found: " + path.string());
    try {
        const json j = json::parse(in);
        SyntheticSpec spec;
        spec.canvas_size = j.value("canvas_size", spec.canvas_size);
        spec.glyph_size = j.value("glyph_size", spec.glyph_size);
        spec.samples_per_class = j.value("samples_per_class", spec.samples_per_class);
        spec.position_jitter = j.value("position_jitter", spec.position_jitter);
        spec.intensity_jitter = j.value("intensity_jitter", spec.intensity_jitter);
        spec.noise_std = j.value("noise_std", spec.noise_std);
        spec.background = j.value("background", spec.background);
        spec.foreground = j.value("foreground", spec.foreground);
        spec.seed = j.value("seed", spec.seed);
        for (const auto& u : j.at("units")) {
            const auto r = u.at("region").get<std::vector<long>>();
            if (r.size() != 4) throw DataError("region must be [x0, y0, x1, y1]");
            spec.units.push_back({u.at("id").get<int>(), parse_glyph(u.at("glyph").get<std::string>()),
                                  {r[0], r[1], r[2], r[3]}});
        }
        for (const auto& c : j.at("classes"))
            spec.classes.push_back({c.at("name").get<std::string>(), c.at("units").get<std::vector<int>>()});
        return spec;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed synthetic spec (" + e.what() + ")");
    }
}

void save_synthetic_spec(const SyntheticSpec& spec, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    json units = json::array();
    for (const auto& u : spec.units)
        units.push_back({{"id", u.id},
                         {"glyph", to_string(u.glyph)},
                         {"region", {u.region.x0, u.region.y0, u.region.x1, u.region.y1}}});
    json classes = json::array();
    for (const auto& c : spec.classes) classes.push_back({{"name", c.name}, {"units", c.units}});
    const json j{{"canvas_size", spec.canvas_size},
                 {"glyph_size", spec.glyph_size},
                 {"units", units},
                 {"classes", classes},
                 {"samples_per_class", spec.samples_per_class},
                 {"position_jitter", spec.position_jitter},
                 {"intensity_jitter", spec.intensity_jitter},
                 {"noise_std", spec.noise_std},
                 {"background", spec.background},
                 {"foreground", spec.foreground},
                 {"seed", spec.seed}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
    SyntheticDataset result;
    result.warnings = spec.validate();
    std::filesystem::create_directories(out_dir / "images");
    result.manifest.base_dir = out_dir;

    std::map<Glyph, Tensor> stencils;
    for (const auto& u : spec.units)
        if (!stencils.count(u.glyph)) stencils.emplace(u.glyph, glyph_stencil(u.glyph, spec.glyph_size));

    const auto canvas = spec.canvas_size;
    const auto g = static_cast<long>(spec.glyph_size);
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const auto& rule = spec.classes[c];
        for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
            auto rng = derived_rng(spec.seed, c, k);
            std::normal_distribution<double> noise(0.0, 1.0);
            std::uniform_int_distribution<long> shift(-spec.position_jitter, spec.position_jitter);
            std::uniform_real_distribution<double> level(-spec.intensity_jitter, spec.intensity_jitter);

            std::vector<double> pixels(canvas * canvas);
            for (auto& p : pixels) p = spec.background + spec.noise_std * noise(rng);

            const std::size_t row = result.manifest.rows.size();
            for (int id : rule.units) {
                const auto& unit = spec.unit(id);
                const auto& r = unit.region;
                const long cx = (r.x0 + r.x1) / 2 + shift(rng);
                const long cy = (r.y0 + r.y1) / 2 + shift(rng);
                const long x = std::clamp(cx - g / 2, r.x0, r.x1 - g + 1);
                const long y = std::clamp(cy - g / 2, r.y0, r.y1 - g + 1);
                const double fg = spec.foreground + level(rng);
                const Tensor& stencil = stencils.at(unit.glyph);
                for (long sy = 0; sy < g; ++sy)
                    for (long sx = 0; sx < g; ++sx) {
                        const real s = stencil[static_cast<std::size_t>(sy * g + sx)];
                        auto& p = pixels[static_cast<std::size_t>((y + sy) * static_cast<long>(canvas) + x + sx)];
                        p += s * (fg - spec.background);
                    }
                result.placements.push_back({row, id, x, y});
            }

            GrayImage image(canvas, canvas);
            for (std::size_t i = 0; i < pixels.size(); ++i)
                image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(pixels[i]), 0L, 255L));
            std::ostringstream name;
            name << rule.name << '_' << std::setw(5) << std::setfill('0') << k;
            const std::string rel = "images/" + name.str() + ".pgm";
            write_pgm(image, out_dir / rel);

            ManifestRow mrow;
            mrow.path = rel;
            mrow.label = rule.name;
            mrow.aus = {rule.units.begin(), rule.units.end()};
            mrow.subject = "synthetic";
            mrow.sequence = name.str();
            result.manifest.rows.push_back(std::move(mrow));
        }
    }

    save_manifest(result.manifest, out_dir / "manifest.csv");
    std::ofstream out(out_dir / "placements.csv");
    if (!out) throw DataError("cannot write placements.csv in " + out_dir.string());
    out << "path,unit,x,y,size\n";
    for (const auto& p : result.placements)
        out << result.manifest.rows[p.row].path << ',' << p.unit << ',' << p.x << ',' << p.y << ','
            << spec.glyph_size << '\n';
    return result;
}

std::vector<Placement> load_placements(const std::filesystem::path& path, const Manifest& manifest) {
    std::ifstream in(path);
    if (!in) throw DataError("placements not found: " + path.string());
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < manifest.size(); ++i)
        row_of[std::filesystem::absolute(manifest.resolve(manifest.rows[i])).lexically_normal().string()] = i;
    const auto base = path.parent_path();
    std::vector<Placement> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string file, unit, x, y;
        std::getline(ss, file, ',');
        std::getline(ss, unit, ',');
        std::getline(ss, x, ',');
        std::getline(ss, y, ',');
        const auto key = std::filesystem::absolute(base / file).lexically_normal().string();
        const auto it = row_of.find(key);
        if (it == row_of.end()) continue;
        out.push_back({it->second, std::stoi(unit), std::stol(x), std::stol(y)});
    }
    return out;
}

}  // namespace auprobe
