#include "auprobe/checkpoint.hpp"

#include "auprobe/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace auprobe {

using json = nlohmann::json;

namespace {

constexpr const char* kPrecision = sizeof(real) == 8 ? "f64" : "f32";

json config_to_json(const ModelConfig& c) {
    return json{{"input_size", c.input_size}, {"conv_channels", c.conv_channels}, {"kernel_size", c.kernel_size},
                {"fc_hidden", c.fc_hidden},   {"num_classes", c.num_classes},     {"init_mode", to_string(c.init_mode)},
                {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.input_size = j.at("input_size").get<std::size_t>();
    c.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
    c.kernel_size = j.at("kernel_size").get<std::size_t>();
    c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.init_mode = parse_init_mode(j.at("init_mode").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

json layer_to_json(const NamedLayer& named) {
    json j{{"name", named.name}, {"type", layer_kind(named.layer)}};
    if (const auto* conv = std::get_if<ConvLayer>(&named.layer)) {
        j["in"] = conv->in_channels();
        j["out"] = conv->out_channels();
        j["kernel"] = conv->kernel_size();
    } else if (const auto* fc = std::get_if<FCLayer>(&named.layer)) {
        j["in"] = fc->in_features();
        j["out"] = fc->out_features();
    }
    return j;
}

Layer layer_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "conv")
        return ConvLayer::create(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
                                 j.at("kernel").get<std::size_t>());
    if (type == "fc") return FCLayer::create(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
    if (type == "relu") return ReluLayer{};
    if (type == "maxpool") return MaxPoolLayer{};
    if (type == "dropout") return DropoutLayer{};
    throw DataError("unknown layer type '" + type + "'");
}

template <typename T>
void append_le(std::string& out, T value) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.append(bytes.data(), bytes.size());
}

template <typename T>
T read_le(const char* p) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

}  // namespace

std::string serialize_checkpoint(const Network& net) {
    json header;
    header["format"] = "auprobe-checkpoint";
    header["format_version"] = kCheckpointVersion;
    header["precision"] = kPrecision;
    header["input_shape"] = net.input_shape();
    header["config"] = net.config ? config_to_json(*net.config) : json(nullptr);
    header["labels"] = net.class_labels;
    json layers = json::array();
    for (const auto& l : net.layers()) layers.push_back(layer_to_json(l));
    header["layers"] = layers;
    json tensors = json::array();
    const auto names = net.parameter_names();
    const auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
        tensors.push_back(json{{"name", names[i]}, {"shape", params[i]->shape()}});
    header["tensors"] = tensors;

    std::string out = header.dump();
    out.push_back('\n');
    for (const auto* p : params)
        for (auto v : p->values()) append_le(out, v);
    return out;
}

Network deserialize_checkpoint(const std::string& bytes, const std::string& origin) {
    const auto newline = bytes.find('\n');
    if (newline == std::string::npos) throw DataError(origin + ": missing checkpoint header");
    json header;
    try {
        header = json::parse(bytes.substr(0, newline));
    } catch (const json::exception& e) {
        throw DataError(origin + ": unreadable checkpoint header (" + e.what() + ")");
    }
    try {
        if (header.value("format", "") != "auprobe-checkpoint") throw DataError("not an auprobe checkpoint");
        if (header.at("format_version").get<int>() != kCheckpointVersion)
            throw DataError("unsupported checkpoint version " + header.at("format_version").dump());
        const auto precision = header.at("precision").get<std::string>();
        if (precision != "f64" && precision != "f32") throw DataError("unknown precision " + precision);
        const std::size_t width = precision == "f64" ? 8 : 4;

        Network net(header.at("input_shape").get<Shape>());
        for (const auto& l : header.at("layers")) net.add(l.at("name").get<std::string>(), layer_from_json(l));
        if (!header.at("config").is_null()) net.config = config_from_json(header.at("config"));
        net.class_labels = header.at("labels").get<std::vector<std::string>>();
        net.activation_shapes();  // validates layer chaining

        auto params = net.parameters();
        const auto names = net.parameter_names();
        const auto& tensors = header.at("tensors");
        if (tensors.size() != params.size())
            throw DataError("header declares " + std::to_string(tensors.size()) + " tensors, layers need " +
                            std::to_string(params.size()));
        std::size_t expected_bytes = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto name = tensors[i].at("name").get<std::string>();
            const auto shape = tensors[i].at("shape").get<Shape>();
            if (name != names[i] || shape != params[i]->shape())
                throw DataError("tensor " + name + " " + shape_string(shape) + " does not match layer tensor " +
                                names[i] + " " + shape_string(params[i]->shape()));
            expected_bytes += params[i]->size() * width;
        }
        const std::size_t payload = bytes.size() - newline - 1;
        if (payload != expected_bytes)
            throw DataError("parameter payload is " + std::to_string(payload) + " bytes, expected " +
                            std::to_string(expected_bytes) + (payload < expected_bytes ? " (truncated)" : ""));
        const char* p = bytes.data() + newline + 1;
        for (auto* t : params) {
            for (auto& v : t->values()) {
                v = width == 8 ? static_cast<real>(read_le<double>(p)) : static_cast<real>(read_le<float>(p));
                p += width;
            }
        }
        return net;
    } catch (const json::exception& e) {
        throw DataError(origin + ": malformed checkpoint header (" + e.what() + ")");
    } catch (const DataError& e) {
        throw DataError(origin + ": " + e.what());
    } catch (const ShapeError& e) {
        throw DataError(origin + ": " + e.what());
    }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(net);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Network load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path), path.string());
}

Network load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    Network net = load_checkpoint(path);
    const Network reference = build(expected);
    const auto& got = net.layers();
    const auto& want = reference.layers();
    if (net.input_shape() != reference.input_shape())
        throw DataError(path.string() + ": input shape " + shape_string(net.input_shape()) + " does not match " +
                        shape_string(reference.input_shape()));
    for (std::size_t i = 0; i < std::max(got.size(), want.size()); ++i) {
        if (i >= got.size()) throw DataError(path.string() + ": checkpoint lacks layer " + want[i].name);
        if (i >= want.size()) throw DataError(path.string() + ": unexpected extra layer " + got[i].name);
        if (layer_to_json(got[i]) != layer_to_json(want[i]))
            throw DataError(path.string() + ": layer " + got[i].name + " " + layer_to_json(got[i]).dump() +
                            " does not match expected " + layer_to_json(want[i]).dump());
    }
    return net;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string network_fingerprint(const Network& net) { return fnv1a_hex(serialize_checkpoint(net)); }

std::string file_fingerprint(const std::filesystem::path& path) { return fnv1a_hex(read_file(path)); }

}  // namespace auprobe
