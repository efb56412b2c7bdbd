#include "auprobe/config.hpp"

#include "auprobe/error.hpp"
#include "auprobe/numfmt.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace auprobe {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::uint64_t to_uint(const std::string& v) {
    std::uint64_t out = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size()) throw ConfigError("expected an unsigned integer, got '" + v + "'");
    return out;
}

real to_real(const std::string& v) {
    try {
        return parse_real(v);
    } catch (const DataError&) {
        throw ConfigError("expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_uint(trim(item)));
    if (out.empty()) throw ConfigError("expected a comma-separated list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_uint(v); }},
        {"threads", [](RunConfig& c, const std::string& v) { c.threads = to_uint(v); }},
        {"model.input_size", [](RunConfig& c, const std::string& v) { c.model.input_size = to_uint(v); }},
        {"model.conv_channels", [](RunConfig& c, const std::string& v) { c.model.conv_channels = to_list(v); }},
        {"model.kernel_size", [](RunConfig& c, const std::string& v) { c.model.kernel_size = to_uint(v); }},
        {"model.fc_hidden", [](RunConfig& c, const std::string& v) { c.model.fc_hidden = to_uint(v); }},
        {"model.num_classes",
         [](RunConfig& c, const std::string& v) {
             if (v == "auto") c.num_classes.reset();
             else c.num_classes = to_uint(v);
         }},
        {"model.init_mode",
         [](RunConfig& c, const std::string& v) {
             try {
                 c.model.init_mode = parse_init_mode(v);
             } catch (const std::exception& e) {
                 throw ConfigError(e.what());
             }
         }},
        {"train.batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_uint(v); }},
        {"train.momentum", [](RunConfig& c, const std::string& v) { c.train.momentum = to_real(v); }},
        {"train.weight_decay", [](RunConfig& c, const std::string& v) { c.train.weight_decay = to_real(v); }},
        {"train.learning_rate", [](RunConfig& c, const std::string& v) { c.train.learning_rate = to_real(v); }},
        {"train.dropout_p", [](RunConfig& c, const std::string& v) { c.train.dropout_p = to_real(v); }},
        {"train.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_uint(v); }},
        {"train.augment", [](RunConfig& c, const std::string& v) { c.train.augment = to_bool(v); }},
        {"train.target_train_acc", [](RunConfig& c, const std::string& v) { c.train.target_train_acc = to_real(v); }},
        {"train.convergence_tol", [](RunConfig& c, const std::string& v) { c.train.convergence_tol = to_real(v); }},
        {"train.convergence_patience",
         [](RunConfig& c, const std::string& v) { c.train.convergence_patience = to_uint(v); }},
        {"data.test_count", [](RunConfig& c, const std::string& v) { c.test_count = to_uint(v); }},
        {"analysis.harvest_block", [](RunConfig& c, const std::string& v) { c.harvest_block = to_uint(v); }},
        {"analysis.top_n", [](RunConfig& c, const std::string& v) { c.top_n = to_uint(v); }},
        {"analysis.normalize", [](RunConfig& c, const std::string& v) { c.normalize = to_bool(v); }},
    };
    return table;
}

}  // namespace

void RunConfig::resolve() {
    model.seed = seed;
    train.seed = seed;
    train.threads = threads;
    if (num_classes) model.num_classes = *num_classes;
}

void RunConfig::validate() const {
    try {
        ModelConfig m = model;
        if (!num_classes) m.num_classes = std::max<std::size_t>(m.num_classes, 2);
        m.validate();
        train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (threads == 0) throw ConfigError("threads must be positive");
    if (top_n == 0) throw ConfigError("analysis.top_n must be positive");
    if (harvest_block > model.conv_channels.size())
        throw ConfigError("analysis.harvest_block exceeds the number of conv blocks");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
        try {
            it->second(config, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + key + ": " + e.what());
        }
    }
    config.resolve();
    config.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::string config_text(const RunConfig& c) {
    std::ostringstream out;
    std::string channels;
    for (std::size_t i = 0; i < c.model.conv_channels.size(); ++i)
        channels += (i ? "," : "") + std::to_string(c.model.conv_channels[i]);
    auto b = [](bool v) { return v ? "true" : "false"; };
    out << "seed = " << c.seed << '\n'
        << "threads = " << c.threads << '\n'
        << "model.input_size = " << c.model.input_size << '\n'
        << "model.conv_channels = " << channels << '\n'
        << "model.kernel_size = " << c.model.kernel_size << '\n'
        << "model.fc_hidden = " << c.model.fc_hidden << '\n'
        << "model.num_classes = " << (c.num_classes ? std::to_string(*c.num_classes) : "auto") << '\n'
        << "model.init_mode = " << to_string(c.model.init_mode) << '\n'
        << "train.batch_size = " << c.train.batch_size << '\n'
        << "train.momentum = " << format_real(c.train.momentum) << '\n'
        << "train.weight_decay = " << format_real(c.train.weight_decay) << '\n'
        << "train.learning_rate = " << format_real(c.train.learning_rate) << '\n'
        << "train.dropout_p = " << format_real(c.train.dropout_p) << '\n'
        << "train.epochs = " << c.train.epochs << '\n'
        << "train.augment = " << b(c.train.augment) << '\n'
        << "train.target_train_acc = " << format_real(c.train.target_train_acc) << '\n'
        << "train.convergence_tol = " << format_real(c.train.convergence_tol) << '\n'
        << "train.convergence_patience = " << c.train.convergence_patience << '\n'
        << "data.test_count = " << c.test_count << '\n'
        << "analysis.harvest_block = " << c.harvest_block << '\n'
        << "analysis.top_n = " << c.top_n << '\n'
        << "analysis.normalize = " << b(c.normalize) << '\n';
    return out.str();
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write config " + path.string());
    out << config_text(config);
}

void apply_environment(RunConfig& config) {
    if (const char* env = std::getenv("AUPROBE_SEED"); env && *env) {
        try {
            config.seed = to_uint(env);
        } catch (const ConfigError&) {
            throw ConfigError(std::string("AUPROBE_SEED must be an unsigned integer, got '") + env + "'");
        }
        config.resolve();
    }
}

}  // namespace auprobe
