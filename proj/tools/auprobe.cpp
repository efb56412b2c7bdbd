// Command-line entry point: synth, train, harvest, deconv, associate, pipeline.

#include "auprobe/checkpoint.hpp"
#include "auprobe/config.hpp"
#include "auprobe/error.hpp"
#include "auprobe/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace auprobe;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void log_line(const std::string& message) { std::cerr << message << '\n'; }

std::vector<int> parse_au_list(const std::string& text) {
    std::vector<int> aus;
    if (text.empty() || text == "all") return aus;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int au = std::stoi(item, &used);
            if (used != item.size() || au <= 0) throw std::invalid_argument(item);
            aus.push_back(au);
        } catch (const std::exception&) {
            throw ConfigError("--au expects 'all' or a comma-separated list of positive integers, got '" + text + "'");
        }
    }
    return aus;
}

RunConfig resolve_config(const std::string& path, std::size_t threads, bool threads_set) {
    RunConfig config = path.empty() ? RunConfig{} : load_config(path);
    if (threads_set) config.threads = threads;
    apply_environment(config);
    config.resolve();
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Expression CNN training, deconvolution and action-unit association"};
    app.require_subcommand(1);
    std::size_t threads = 1;
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    std::function<void()> action;

    // synth
    auto* synth = app.add_subcommand("synth", "Render a synthetic action-unit dataset");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "Synthetic spec JSON (default: bundled spec)");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->callback([&] {
        action = [&] {
            run_stage("synth", synth_spec.empty() ? "<default synthetic spec>" : synth_spec, [&] {
                const auto spec = synth_spec.empty() ? default_synthetic_spec() : load_synthetic_spec(synth_spec);
                stage_synth(spec, synth_out, log_line);
                save_synthetic_spec(spec, fs::path(synth_out) / "spec.resolved.json");
            });
        };
    });

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the expression network from scratch");
    std::string train_manifest, train_config, train_out, train_log;
    train_cmd->add_option("--manifest", train_manifest, "Manifest CSV")->required();
    train_cmd->add_option("--config", train_config, "Run config (key = value)");
    train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
    train_cmd->add_option("--log", train_log, "Metrics CSV (default: <checkpoint dir>/metrics.csv)");
    train_cmd->callback([&] {
        action = [&] {
            const auto config = resolve_config(train_config, threads, app.count("--threads") > 0);
            const fs::path log_path =
                train_log.empty() ? fs::path(train_out).parent_path() / "metrics.csv" : fs::path(train_log);
            run_stage("train", train_manifest, [&] { stage_train(train_manifest, config, train_out, log_path, log_line); });
        };
    });

    // harvest
    auto* harvest_cmd = app.add_subcommand("harvest", "Record per-image maxima of every feature map");
    std::string harvest_ckpt, harvest_manifest, harvest_out, harvest_split = "train";
    std::size_t harvest_block = 0;
    harvest_cmd->add_option("--checkpoint", harvest_ckpt, "Checkpoint")->required();
    harvest_cmd->add_option("--manifest", harvest_manifest, "Manifest CSV")->required();
    harvest_cmd->add_option("--out", harvest_out, "Activation DB CSV")->required();
    harvest_cmd->add_option("--block", harvest_block, "Conv block to harvest (default: last)");
    harvest_cmd->add_option("--split", harvest_split, "Split name recorded in the DB");
    harvest_cmd->callback([&] {
        action = [&] {
            run_stage("harvest", harvest_manifest, [&] {
                const auto db = stage_harvest(harvest_ckpt, harvest_manifest, harvest_out, harvest_block, threads,
                                              harvest_split);
                log_line("harvest: " + std::to_string(db.num_images()) + " images x " + std::to_string(db.num_maps()) +
                         " maps -> " + harvest_out);
            });
        };
    });

    // deconv
    auto* deconv_cmd = app.add_subcommand("deconv", "Montage of a feature map's top responses");
    std::string deconv_ckpt, deconv_manifest, deconv_out;
    std::size_t deconv_map = 0, deconv_top = 9, deconv_block = 0;
    deconv_cmd->add_option("--checkpoint", deconv_ckpt, "Checkpoint")->required();
    deconv_cmd->add_option("--manifest", deconv_manifest, "Manifest CSV")->required();
    deconv_cmd->add_option("--map", deconv_map, "Feature map index")->required();
    deconv_cmd->add_option("--top", deconv_top, "Images per montage")->check(CLI::PositiveNumber);
    deconv_cmd->add_option("--block", deconv_block, "Conv block (default: last)");
    deconv_cmd->add_option("--out", deconv_out, "Output directory")->required();
    deconv_cmd->callback([&] {
        action = [&] {
            run_stage("deconv", deconv_manifest, [&] {
                const auto result =
                    stage_deconv(deconv_ckpt, deconv_manifest, deconv_map, deconv_top, deconv_out, deconv_block, threads);
                for (const auto& w : result.warnings) log_line("warning: " + w);
                log_line("deconv: wrote " + result.original.string() + " and " + result.deconvolution.string());
            });
        };
    });

    // associate
    auto* assoc_cmd = app.add_subcommand("associate", "Distance profiles and detector maps per action unit");
    std::string assoc_db, assoc_manifest, assoc_aus = "all", assoc_out, assoc_ckpt;
    std::size_t assoc_n = 9;
    bool assoc_normalize = false;
    assoc_cmd->add_option("--db", assoc_db, "Activation DB CSV")->required();
    assoc_cmd->add_option("--manifest", assoc_manifest, "Manifest CSV the DB was harvested from")->required();
    assoc_cmd->add_option("--au", assoc_aus, "'all' or comma-separated AU ids");
    assoc_cmd->add_option("--n", assoc_n, "Top-n responses per partition")->check(CLI::PositiveNumber);
    assoc_cmd->add_flag("--normalize", assoc_normalize, "Normalize response lists to sum 1");
    assoc_cmd->add_option("--checkpoint", assoc_ckpt, "Checkpoint, for montages and exemplars");
    assoc_cmd->add_option("--out", assoc_out, "Output directory")->required();
    assoc_cmd->callback([&] {
        action = [&] {
            AssociateOptions options;
            options.aus = parse_au_list(assoc_aus);
            options.n = assoc_n;
            options.normalize = assoc_normalize;
            options.threads = threads;
            options.checkpoint = assoc_ckpt;
            run_stage("associate", assoc_db, [&] { stage_associate(assoc_db, assoc_manifest, options, assoc_out, log_line); });
        };
    });

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "synth -> train -> harvest -> associate");
    std::string pipe_spec, pipe_manifest, pipe_config, pipe_out;
    auto* spec_opt = pipe_cmd->add_option("--spec", pipe_spec, "Synthetic spec JSON, or 'default'");
    auto* manifest_opt = pipe_cmd->add_option("--manifest", pipe_manifest, "Existing manifest CSV");
    spec_opt->excludes(manifest_opt);
    pipe_cmd->add_option("--config", pipe_config, "Run config (key = value)");
    pipe_cmd->add_option("--out", pipe_out, "Output directory")->required();
    pipe_cmd->callback([&] {
        if (pipe_spec.empty() && pipe_manifest.empty())
            throw CLI::ValidationError("pipeline", "one of --spec or --manifest is required");
        action = [&] {
            const auto config = resolve_config(pipe_config, threads, app.count("--threads") > 0);
            PipelineInputs inputs;
            if (pipe_spec == "default") inputs.default_spec = true;
            else inputs.spec = pipe_spec;
            inputs.manifest = pipe_manifest;
            const auto out = stage_pipeline(inputs, config, pipe_out, log_line);
            for (const auto& p : out.profiles)
                std::cout << "AU " << p.au << " -> map " << p.argmax_map << " distance " << p.max_distance() << '\n';
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        action();
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
}
