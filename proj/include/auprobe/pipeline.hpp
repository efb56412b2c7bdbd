#pragma once

#include "auprobe/association.hpp"
#include "auprobe/config.hpp"
#include "auprobe/harvest.hpp"
#include "auprobe/report.hpp"
#include "auprobe/synthetic.hpp"
#include "auprobe/train.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace auprobe {

/// Runs `body`, prefixing any error with the stage name and its input while
/// keeping the error type.
void run_stage(const std::string& stage, const std::string& input, const std::function<void()>& body);

using Log = std::function<void(const std::string&)>;

SyntheticDataset stage_synth(const SyntheticSpec& spec, const std::filesystem::path& out_dir, const Log& log = {});

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics;
    std::filesystem::path train_manifest;  // harvest input
    std::filesystem::path test_manifest;   // empty when test_count is 0
    TrainResult result;
};

/// Splits the manifest, builds the model (num_classes from the labels unless
/// set), trains, and writes the checkpoint, metrics CSV, split manifests and a
/// resolved config copy next to the checkpoint.
TrainOutputs stage_train(const std::filesystem::path& manifest, const RunConfig& config,
                         const std::filesystem::path& checkpoint, const std::filesystem::path& metrics,
                         const Log& log = {});

ActivationDB stage_harvest(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                           const std::filesystem::path& out_db, std::size_t block, std::size_t threads,
                           const std::string& split = "train");

MontageResult stage_deconv(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                           std::size_t map, std::size_t top, const std::filesystem::path& out_dir,
                           std::size_t block = 0, std::size_t threads = 1);

struct AssociateOptions {
    std::vector<int> aus;  // empty: every AU in the manifest
    std::size_t n = 9;
    bool normalize = false;
    std::size_t threads = 1;
    /// Optional; enables montages and exemplars in the summary.
    std::filesystem::path checkpoint;
};

std::vector<AUDistanceProfile> stage_associate(const std::filesystem::path& db, const std::filesystem::path& manifest,
                                               const AssociateOptions& options, const std::filesystem::path& out_dir,
                                               const Log& log = {});

struct PipelineInputs {
    std::filesystem::path spec;      // synthetic spec, or
    std::filesystem::path manifest;  // an existing manifest
    bool default_spec = false;       // bundled default synthetic spec
};

struct PipelineOutputs {
    TrainOutputs train;
    std::filesystem::path db;
    std::vector<AUDistanceProfile> profiles;
};

/// synth (when given a spec) -> train -> harvest -> associate, under out_dir.
PipelineOutputs stage_pipeline(const PipelineInputs& inputs, const RunConfig& config,
                               const std::filesystem::path& out_dir, const Log& log = {});

}  // namespace auprobe
