#include "auprobe/config.hpp"
#include "auprobe/error.hpp"

#include "support/scratch.hpp"

#include <doctest.h>

#include <cstdlib>
#include <string>

using namespace auprobe;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "run.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

// Restores AUPROBE_SEED on scope exit.
struct SeedEnv {
    std::string saved;
    bool had = false;
    SeedEnv() {
        if (const char* v = std::getenv("AUPROBE_SEED")) {
            had = true;
            saved = v;
        }
    }
    ~SeedEnv() {
        if (had) setenv("AUPROBE_SEED", saved.c_str(), 1);
        else unsetenv("AUPROBE_SEED");
    }
};

}  // namespace

TEST_CASE("config text round-trips through the parser") {
    const RunConfig parsed = parse_config(R"(
# reduced run
seed = 42
threads = 2
model.input_size = 48
model.conv_channels = 8, 16, 32
model.fc_hidden = 128
model.num_classes = auto
train.batch_size = 16
train.learning_rate = 0.01   # per-sample step
train.augment = false
analysis.top_n = 5
analysis.normalize = true
)");
    CHECK(parsed.seed == 42);
    CHECK(parsed.model.seed == 42);
    CHECK(parsed.train.seed == 42);
    CHECK(parsed.model.conv_channels == std::vector<std::size_t>{8, 16, 32});
    CHECK(!parsed.num_classes);
    CHECK(parsed.train.learning_rate == doctest::Approx(0.01));
    CHECK(!parsed.train.augment);
    CHECK(parsed.normalize);

    const std::string text = config_text(parsed);
    CHECK(config_text(parse_config(text)) == text);

    testing::ScratchDir dir("config");
    save_config(parsed, dir / "nested" / "c.cfg");
    CHECK(config_text(load_config(dir / "nested" / "c.cfg")) == text);
}

TEST_CASE("an empty config gives the defaults") {
    const RunConfig c = parse_config("");
    CHECK(c.model == ModelConfig{});
    CHECK(c.top_n == 9);
    CHECK(c.harvest_block == 0);
}

TEST_CASE("config errors name the offending line") {
    CHECK(error_of("seed = 1\nmodel.depth = 4\n").find("run.cfg:2") != std::string::npos);
    CHECK(error_of("seed = 1\nmodel.depth = 4\n").find("model.depth") != std::string::npos);
    CHECK(error_of("\n\ntrain.epochs = many\n").find("run.cfg:3") != std::string::npos);
    CHECK(error_of("train.augment = maybe").find("train.augment") != std::string::npos);
    CHECK(error_of("just words").find("key = value") != std::string::npos);
    CHECK(!error_of("model.conv_channels = 32,16,8").empty());
    CHECK(!error_of("analysis.harvest_block = 4").empty());
    CHECK(!error_of("threads = 0").empty());
    CHECK(!error_of("model.init_mode = xavier").empty());
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("AUPROBE_SEED overrides the configured seed") {
    SeedEnv guard;
    RunConfig c = parse_config("seed = 3");
    setenv("AUPROBE_SEED", "99", 1);
    apply_environment(c);
    CHECK(c.seed == 99);
    CHECK(c.model.seed == 99);
    CHECK(c.train.seed == 99);

    setenv("AUPROBE_SEED", "soon", 1);
    CHECK_THROWS_AS(apply_environment(c), ConfigError);
    unsetenv("AUPROBE_SEED");
    RunConfig d = parse_config("seed = 3");
    apply_environment(d);
    CHECK(d.seed == 3);
}
