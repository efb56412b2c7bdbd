#include "auprobe/harvest.hpp"

#include "auprobe/checkpoint.hpp"
#include "auprobe/error.hpp"
#include "auprobe/numfmt.hpp"
#include "auprobe/parallel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace auprobe {

ActivationDB::ActivationDB(std::size_t num_images, std::size_t num_maps, Provenance provenance)
    : num_images_(num_images), num_maps_(num_maps), provenance_(std::move(provenance)),
      records_(num_images * num_maps) {
    for (std::size_t i = 0; i < num_images; ++i)
        for (std::size_t m = 0; m < num_maps; ++m) {
            records_[i * num_maps + m].image_id = i;
            records_[i * num_maps + m].map = m;
        }
}

const ActivationRecord& ActivationDB::record(std::size_t image, std::size_t map) const {
    if (image >= num_images_ || map >= num_maps_) throw ShapeError("activation record index out of range");
    return records_[image * num_maps_ + map];
}

ActivationRecord& ActivationDB::record(std::size_t image, std::size_t map) {
    if (image >= num_images_ || map >= num_maps_) throw ShapeError("activation record index out of range");
    return records_[image * num_maps_ + map];
}

std::string manifest_fingerprint(const Manifest& manifest) { return fnv1a_hex(manifest_csv(manifest)); }

std::vector<ActivationRecord> harvest_trace(const ForwardTrace& trace, std::size_t tap, std::size_t image_id) {
    if (tap >= trace.activations.size() || trace.activations[tap].rank() != 3)
        throw ShapeError("harvest tap is not a [C,H,W] activation");
    const Tensor& act = trace.activations[tap];
    const std::size_t maps = act.dim(0), h = act.dim(1), w = act.dim(2);
    std::vector<ActivationRecord> out(maps);
    for (std::size_t m = 0; m < maps; ++m) {
        const real* plane = act.data() + m * h * w;
        const auto best = static_cast<std::size_t>(std::max_element(plane, plane + h * w) - plane);
        out[m] = {image_id, m, plane[best], best / w, best % w};
    }
    return out;
}

ActivationDB harvest_inputs(const Network& net, const std::vector<Tensor>& inputs, std::size_t tap,
                            Provenance provenance, std::size_t threads) {
    const auto shapes = net.activation_shapes();
    if (tap >= shapes.size() || shapes[tap].size() != 3) throw ShapeError("harvest tap is not a feature layer");
    provenance.tap = tap;
    ActivationDB db(inputs.size(), shapes[tap][0], std::move(provenance));
    parallel_for(inputs.size(), threads, [&](std::size_t i) {
        const auto trace = net.forward(inputs[i]);
        const auto records = harvest_trace(trace, tap, i);
        for (const auto& r : records) db.record(i, r.map) = r;
    });
    return db;
}

ActivationDB harvest(const Network& net, const Manifest& manifest, const HarvestOptions& options) {
    const auto& in = net.input_shape();
    if (in.size() != 3 || in[0] != 1 || in[1] != in[2]) throw ShapeError("harvest expects a square grayscale network");
    const std::size_t block = options.block ? options.block : net.conv_block_count();
    const std::size_t tap = net.block_output(block);
    const auto inputs = eval_inputs(manifest, in[1], options.threads);
    Provenance provenance{network_fingerprint(net), manifest_fingerprint(manifest), options.split, tap};
    return harvest_inputs(net, inputs, tap, std::move(provenance), options.threads);
}

std::vector<ActivationRecord> top_n(const ActivationDB& db, std::size_t map, const std::vector<std::size_t>& subset,
                                    std::size_t n) {
    if (subset.empty()) throw DataError("top_n: empty image subset");
    std::vector<std::size_t> ids = subset;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<ActivationRecord> records;
    records.reserve(ids.size());
    for (auto id : ids) records.push_back(db.record(id, map));
    const std::size_t keep = std::min(n, records.size());
    std::partial_sort(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(keep), records.end(),
                      [](const ActivationRecord& a, const ActivationRecord& b) {
                          return a.value != b.value ? a.value > b.value : a.image_id < b.image_id;
                      });
    records.resize(keep);
    return records;
}

AUPartition partition_by_au(const Manifest& manifest, int au) {
    AUPartition p;
    for (std::size_t i = 0; i < manifest.size(); ++i)
        (manifest.rows[i].aus.count(au) ? p.present : p.absent).push_back(i);
    if (p.present.empty()) throw DataError("action unit " + std::to_string(au) + " does not occur in the dataset");
    return p;
}

void save_db(const ActivationDB& db, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write activation DB " + path.string());
    const auto& p = db.provenance();
    out << "# provenance checkpoint=" << p.checkpoint << " manifest=" << p.manifest << " split=" << p.split
        << " tap=" << p.tap << " images=" << db.num_images() << " maps=" << db.num_maps() << '\n';
    out << "image_id,map,value,row,col\n";
    for (const auto& r : db.records())
        out << r.image_id << ',' << r.map << ',' << format_real(r.value) << ',' << r.row << ',' << r.col << '\n';
}

ActivationDB load_db(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("activation DB not found: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# provenance", 0) != 0)
        throw DataError(path.string() + ": missing provenance line");
    Provenance p;
    std::size_t images = 0, maps = 0;
    std::istringstream fields(line.substr(12));
    std::string kv;
    while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (key == "checkpoint") p.checkpoint = value;
        else if (key == "manifest") p.manifest = value;
        else if (key == "split") p.split = value;
        else if (key == "tap") p.tap = std::stoul(value);
        else if (key == "images") images = std::stoul(value);
        else if (key == "maps") maps = std::stoul(value);
    }
    if (!std::getline(in, line) || line != "image_id,map,value,row,col")
        throw DataError(path.string() + ": missing column header");
    ActivationDB db(images, maps, p);
    std::vector<bool> seen(images * maps, false);
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ActivationRecord r;
        char c1, c2, c3;
        std::istringstream ss(line);
        std::string value;
        if (!(ss >> r.image_id >> c1 >> r.map >> c2) || c1 != ',' || c2 != ',' || !std::getline(ss, value, ',') ||
            !(ss >> r.row >> c3 >> r.col) || c3 != ',')
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
        r.value = parse_real(value);
        if (r.image_id >= images || r.map >= maps || seen[r.image_id * maps + r.map])
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": record out of range or duplicated");
        seen[r.image_id * maps + r.map] = true;
        db.record(r.image_id, r.map) = r;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw DataError(path.string() + ": missing records (expected " + std::to_string(maps) + " per image)");
    return db;
}

void verify_provenance(const ActivationDB& db, const std::string& checkpoint, const std::string& manifest) {
    if (db.provenance().checkpoint != checkpoint)
        throw DataError("activation DB was harvested from checkpoint " + db.provenance().checkpoint + ", not " +
                        checkpoint);
    if (db.provenance().manifest != manifest)
        throw DataError("activation DB was harvested from manifest " + db.provenance().manifest + ", not " + manifest);
}

}  // namespace auprobe
