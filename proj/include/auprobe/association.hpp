#pragma once

#include "auprobe/data.hpp"
#include "auprobe/harvest.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace auprobe {

inline constexpr double kDistanceEpsilon = 1e-8;

struct DistanceOptions {
    double epsilon = kDistanceEpsilon;
    /// Scale each floored list to sum 1 before comparing.
    bool normalize = false;
};

/// Sum over k of R_k log(R_k / Q_k), natural log, after flooring every value at epsilon.
/// Lists are paired rank-wise and must have equal length.
double kl_term(const std::vector<double>& r, const std::vector<double>& q, const DistanceOptions& options = {});

/// Top-n responses of one map: R over AU-present images, Q over AU-absent images.
struct ResponsePair {
    std::vector<double> r;
    std::vector<double> q;
};

/// Truncates both lists to the shorter length.
ResponsePair make_pair(std::vector<double> r, std::vector<double> q);

double symmetric_distance(const ResponsePair& pair, const DistanceOptions& options = {});

struct AUDistanceProfile {
    int au = 0;
    std::vector<double> distances;  // one per feature map
    std::size_t argmax_map = 0;
    std::size_t n_used = 0;
    Provenance provenance;
    std::vector<std::vector<std::size_t>> top_present;  // per map, image ids of R
    std::vector<std::vector<std::size_t>> top_absent;   // per map, image ids of Q
    std::vector<std::string> warnings;

    double max_distance() const { return distances.at(argmax_map); }
};

/// First index of the largest value.
std::size_t argmax_first(const std::vector<double>& values);

AUDistanceProfile profile(const ActivationDB& db, const Manifest& manifest, int au, std::size_t n = 9,
                          const DistanceOptions& options = {});

/// One profile per AU, in the given order.
std::vector<AUDistanceProfile> profile_all(const ActivationDB& db, const Manifest& manifest,
                                           const std::vector<int>& aus, std::size_t n = 9,
                                           const DistanceOptions& options = {}, std::size_t threads = 1);

/// `map,distance` per map, then `argmax,<map>,<distance>`.
std::string profile_csv(const AUDistanceProfile& profile);
void write_profile_csv(const AUDistanceProfile& profile, const std::filesystem::path& path);

}  // namespace auprobe
