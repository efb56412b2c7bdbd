#include "auprobe/association.hpp"

#include "auprobe/error.hpp"
#include "auprobe/numfmt.hpp"
#include "auprobe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace auprobe {

namespace {

std::vector<double> floored(const std::vector<double>& values, const DistanceOptions& options) {
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(values[k] >= 0)) throw NumericError("distance inputs must be non-negative and finite");
        out[k] = std::max(values[k], options.epsilon);
    }
    if (options.normalize) {
        const double total = std::accumulate(out.begin(), out.end(), 0.0);
        for (auto& v : out) v /= total;
    }
    return out;
}

}  // namespace

double kl_term(const std::vector<double>& r, const std::vector<double>& q, const DistanceOptions& options) {
    if (r.size() != q.size())
        throw ShapeError("kl_term: lists differ in length (" + std::to_string(r.size()) + " vs " +
                         std::to_string(q.size()) + ")");
    if (!(options.epsilon > 0)) throw std::invalid_argument("kl_term: epsilon must be positive");
    const auto fr = floored(r, options), fq = floored(q, options);
    double sum = 0;
    for (std::size_t k = 0; k < fr.size(); ++k) sum += fr[k] * std::log(fr[k] / fq[k]);
    return sum;
}

ResponsePair make_pair(std::vector<double> r, std::vector<double> q) {
    const std::size_t n = std::min(r.size(), q.size());
    r.resize(n);
    q.resize(n);
    return {std::move(r), std::move(q)};
}

double symmetric_distance(const ResponsePair& pair, const DistanceOptions& options) {
    return kl_term(pair.r, pair.q, options) + kl_term(pair.q, pair.r, options);
}

std::size_t argmax_first(const std::vector<double>& values) {
    if (values.empty()) throw ShapeError("argmax of an empty list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

AUDistanceProfile profile(const ActivationDB& db, const Manifest& manifest, int au, std::size_t n,
                          const DistanceOptions& options) {
    if (n == 0) throw std::invalid_argument("profile: n must be positive");
    if (manifest.size() != db.num_images())
        throw DataError("activation DB has " + std::to_string(db.num_images()) + " images but the manifest has " +
                        std::to_string(manifest.size()));
    const auto parts = partition_by_au(manifest, au);
    if (parts.absent.empty())
        throw DataError("action unit " + std::to_string(au) + " is present in every image; no contrast set");

    AUDistanceProfile p;
    p.au = au;
    p.provenance = db.provenance();
    p.n_used = std::min({n, parts.present.size(), parts.absent.size()});
    if (p.n_used < n)
        p.warnings.push_back("AU " + std::to_string(au) + ": partitions hold " + std::to_string(parts.present.size()) +
                             " and " + std::to_string(parts.absent.size()) + " images; using n=" +
                             std::to_string(p.n_used));

    const std::size_t maps = db.num_maps();
    p.distances.resize(maps);
    p.top_present.resize(maps);
    p.top_absent.resize(maps);
    for (std::size_t m = 0; m < maps; ++m) {
        const auto rs = top_n(db, m, parts.present, p.n_used);
        const auto qs = top_n(db, m, parts.absent, p.n_used);
        ResponsePair pair;
        for (const auto& rec : rs) {
            pair.r.push_back(static_cast<double>(rec.value));
            p.top_present[m].push_back(rec.image_id);
        }
        for (const auto& rec : qs) {
            pair.q.push_back(static_cast<double>(rec.value));
            p.top_absent[m].push_back(rec.image_id);
        }
        p.distances[m] = symmetric_distance(pair, options);
    }
    p.argmax_map = argmax_first(p.distances);
    return p;
}

std::vector<AUDistanceProfile> profile_all(const ActivationDB& db, const Manifest& manifest,
                                           const std::vector<int>& aus, std::size_t n,
                                           const DistanceOptions& options, std::size_t threads) {
    std::vector<AUDistanceProfile> out(aus.size());
    parallel_for(aus.size(), threads, [&](std::size_t i) { out[i] = profile(db, manifest, aus[i], n, options); });
    return out;
}

std::string profile_csv(const AUDistanceProfile& profile) {
    std::ostringstream out;
    out << "map,distance\n";
    for (std::size_t m = 0; m < profile.distances.size(); ++m)
        out << m << ',' << format_real(profile.distances[m]) << '\n';
    out << "argmax," << profile.argmax_map << ',' << format_real(profile.max_distance()) << '\n';
    return out.str();
}

void write_profile_csv(const AUDistanceProfile& profile, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write profile " + path.string());
    out << profile_csv(profile);
    if (!out) throw DataError("failed writing profile " + path.string());
}

}  // namespace auprobe
