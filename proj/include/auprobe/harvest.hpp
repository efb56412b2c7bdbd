#pragma once

#include "auprobe/data.hpp"
#include "auprobe/network.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace auprobe {

/// Per-(image, map) spatial maximum of the tapped feature layer.
struct ActivationRecord {
    std::size_t image_id = 0;
    std::size_t map = 0;
    real value = 0;
    std::size_t row = 0, col = 0;

    friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;
};

struct Provenance {
    std::string checkpoint;  // network fingerprint
    std::string manifest;    // manifest fingerprint
    std::string split = "train";
    std::size_t tap = 0;     // activation index harvested

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Image-major table of activation records: exactly num_maps records per image.
class ActivationDB {
public:
    ActivationDB() = default;
    ActivationDB(std::size_t num_images, std::size_t num_maps, Provenance provenance);

    std::size_t num_images() const { return num_images_; }
    std::size_t num_maps() const { return num_maps_; }
    const Provenance& provenance() const { return provenance_; }

    const ActivationRecord& record(std::size_t image, std::size_t map) const;
    ActivationRecord& record(std::size_t image, std::size_t map);
    const std::vector<ActivationRecord>& records() const { return records_; }

    friend bool operator==(const ActivationDB&, const ActivationDB&) = default;

private:
    std::size_t num_images_ = 0, num_maps_ = 0;
    Provenance provenance_;
    std::vector<ActivationRecord> records_;
};

std::string manifest_fingerprint(const Manifest& manifest);

/// Records of one forward pass: spatial max and its first row-major location for every map.
std::vector<ActivationRecord> harvest_trace(const ForwardTrace& trace, std::size_t tap, std::size_t image_id);

/// Harvests pre-transformed inputs; image ids are input positions.
ActivationDB harvest_inputs(const Network& net, const std::vector<Tensor>& inputs, std::size_t tap,
                            Provenance provenance, std::size_t threads = 1);

struct HarvestOptions {
    std::size_t block = 0;  // conv block to harvest; 0 means the last one
    std::string split = "train";
    std::size_t threads = 1;
};

/// Runs every manifest row (eval_transform, no augmentation) through the network.
ActivationDB harvest(const Network& net, const Manifest& manifest, const HarvestOptions& options = {});

/// The n records with the largest values among `subset`, descending; ties go to
/// the smaller image id. Shorter when the subset is smaller than n.
std::vector<ActivationRecord> top_n(const ActivationDB& db, std::size_t map, const std::vector<std::size_t>& subset,
                                    std::size_t n);

struct AUPartition {
    std::vector<std::size_t> present;  // S
    std::vector<std::size_t> absent;   // S^c
};

AUPartition partition_by_au(const Manifest& manifest, int au);

void save_db(const ActivationDB& db, const std::filesystem::path& path);
ActivationDB load_db(const std::filesystem::path& path);
/// Throws DataError when the DB was not built from these inputs.
void verify_provenance(const ActivationDB& db, const std::string& checkpoint, const std::string& manifest);

}  // namespace auprobe
