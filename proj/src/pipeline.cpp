#include "auprobe/pipeline.hpp"

#include "auprobe/checkpoint.hpp"
#include "auprobe/error.hpp"

#include <cmath>
#include <sstream>

namespace fs = std::filesystem;

namespace auprobe {

namespace {

void say(const Log& log, const std::string& message) {
    if (log) log(message);
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

void run_stage(const std::string& stage, const std::string& input, const std::function<void()>& body) {
    const auto where = [&](const std::exception& e) {
        return "stage '" + stage + "' (input: " + input + "): " + e.what();
    };
    try {
        body();
    } catch (const ConfigError& e) {
        throw ConfigError(where(e));
    } catch (const NumericError& e) {
        throw NumericError(where(e));
    } catch (const DataError& e) {
        throw DataError(where(e));
    } catch (const ShapeError& e) {
        throw ShapeError(where(e));
    } catch (const std::exception& e) {
        throw DataError(where(e));
    }
}

SyntheticDataset stage_synth(const SyntheticSpec& spec, const fs::path& out_dir, const Log& log) {
    auto data = generate_synthetic(spec, out_dir);
    for (const auto& w : data.warnings) say(log, "warning: " + w);
    say(log, "synth: wrote " + std::to_string(data.manifest.size()) + " images to " + out_dir.string());
    return data;
}

TrainOutputs stage_train(const fs::path& manifest_path, const RunConfig& config, const fs::path& checkpoint,
                         const fs::path& metrics, const Log& log) {
    RunConfig cfg = config;
    cfg.resolve();
    const Manifest manifest = load_manifest(manifest_path);
    const auto labels = label_set(manifest);
    if (!cfg.num_classes) cfg.model.num_classes = labels.size();
    if (cfg.model.num_classes < labels.size())
        throw DataError("manifest has " + std::to_string(labels.size()) + " labels but the model has " +
                        std::to_string(cfg.model.num_classes) + " classes");
    cfg.validate();
    try {
        cfg.model.validate();
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }

    TrainOutputs out;
    out.checkpoint = checkpoint;
    out.metrics = metrics;
    const fs::path dir = checkpoint.has_parent_path() ? checkpoint.parent_path() : fs::path(".");
    fs::create_directories(dir);
    ensure_parent(metrics);
    save_config(cfg, dir / "config.resolved.txt");

    Manifest train_rows = manifest, test_rows;
    if (cfg.test_count > 0) {
        auto parts = split(manifest, cfg.test_count, cfg.seed);
        train_rows = std::move(parts.train);
        test_rows = std::move(parts.test);
        out.test_manifest = dir / "test_manifest.csv";
        save_manifest(test_rows, out.test_manifest);
    }
    out.train_manifest = dir / "train_manifest.csv";
    save_manifest(train_rows, out.train_manifest);

    Network net = build(cfg.model);
    net.class_labels = labels;
    const auto train_set = load_examples(train_rows, labels, cfg.threads);
    std::vector<Example> test_set;
    if (cfg.test_count > 0) test_set = load_examples(test_rows, labels, cfg.threads);

    say(log, "train: " + std::to_string(train_set.size()) + " training and " + std::to_string(test_set.size()) +
                 " test images, " + std::to_string(labels.size()) + " classes");
    out.result = train(net, train_set, test_set.empty() ? nullptr : &test_set, cfg.train, [&](const EpochMetrics& m) {
        std::ostringstream line;
        line << "epoch " << m.epoch << " loss " << m.train_loss << " train_acc " << m.train_acc;
        if (!std::isnan(m.test_acc)) line << " test_acc " << m.test_acc;
        say(log, line.str());
    });
    say(log, "train: stopped (" + out.result.stop_reason + ")");
    save_checkpoint(net, checkpoint);
    write_metrics_csv(out.result.log, metrics);
    return out;
}

ActivationDB stage_harvest(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out_db,
                           std::size_t block, std::size_t threads, const std::string& split) {
    const Network net = load_checkpoint(checkpoint);
    const Manifest manifest = load_manifest(manifest_path);
    HarvestOptions options;
    options.block = block;
    options.split = split;
    options.threads = threads;
    auto db = harvest(net, manifest, options);
    ensure_parent(out_db);
    save_db(db, out_db);
    return db;
}

MontageResult stage_deconv(const fs::path& checkpoint, const fs::path& manifest_path, std::size_t map, std::size_t top,
                           const fs::path& out_dir, std::size_t block, std::size_t threads) {
    const Network net = load_checkpoint(checkpoint);
    const Manifest manifest = load_manifest(manifest_path);
    HarvestOptions options;
    options.block = block;
    options.threads = threads;
    const auto db = harvest(net, manifest, options);
    return montage(db, net, manifest, map, top, out_dir);
}

std::vector<AUDistanceProfile> stage_associate(const fs::path& db_path, const fs::path& manifest_path,
                                               const AssociateOptions& options, const fs::path& out_dir,
                                               const Log& log) {
    const ActivationDB db = load_db(db_path);
    const Manifest manifest = load_manifest(manifest_path);
    if (db.provenance().manifest != manifest_fingerprint(manifest))
        throw DataError("activation DB " + db_path.string() + " was not harvested from " + manifest_path.string());
    std::optional<Network> net;
    if (!options.checkpoint.empty()) net = load_checkpoint(options.checkpoint);

    auto aus = options.aus;
    if (aus.empty()) aus = au_set(manifest);
    if (aus.empty()) throw DataError("manifest lists no action units");
    DistanceOptions distance;
    distance.normalize = options.normalize;
    auto profiles = profile_all(db, manifest, aus, options.n, distance, options.threads);
    for (const auto& p : profiles) {
        for (const auto& w : p.warnings) say(log, "warning: " + w);
        std::ostringstream line;
        line << "associate: AU " << p.au << " -> map " << p.argmax_map << " (distance " << p.max_distance() << ")";
        say(log, line.str());
    }
    fs::create_directories(out_dir);
    au_summary(profiles, db, net ? &*net : nullptr, manifest, out_dir, options.n);
    return profiles;
}

PipelineOutputs stage_pipeline(const PipelineInputs& inputs, const RunConfig& config, const fs::path& out_dir,
                               const Log& log) {
    PipelineOutputs out;
    fs::create_directories(out_dir);
    save_config(config, out_dir / "config.resolved.txt");

    fs::path manifest = inputs.manifest;
    if (inputs.default_spec || !inputs.spec.empty()) {
        const std::string input = inputs.default_spec ? "<default synthetic spec>" : inputs.spec.string();
        run_stage("synth", input, [&] {
            const auto spec = inputs.default_spec ? default_synthetic_spec() : load_synthetic_spec(inputs.spec);
            save_synthetic_spec(spec, out_dir / "data" / "spec.json");
            stage_synth(spec, out_dir / "data", log);
        });
        manifest = out_dir / "data" / "manifest.csv";
    }
    if (manifest.empty()) throw ConfigError("pipeline needs a synthetic spec or a manifest");

    run_stage("train", manifest.string(), [&] {
        out.train = stage_train(manifest, config, out_dir / "model" / "checkpoint.bin", out_dir / "model" / "metrics.csv",
                                log);
    });
    out.db = out_dir / "harvest" / "activations.csv";
    run_stage("harvest", out.train.train_manifest.string(), [&] {
        stage_harvest(out.train.checkpoint, out.train.train_manifest, out.db, config.harvest_block, config.threads);
    });
    run_stage("associate", out.db.string(), [&] {
        AssociateOptions options;
        options.n = config.top_n;
        options.normalize = config.normalize;
        options.threads = config.threads;
        options.checkpoint = out.train.checkpoint;
        out.profiles = stage_associate(out.db, out.train.train_manifest, options, out_dir / "report", log);
    });
    return out;
}

}  // namespace auprobe
