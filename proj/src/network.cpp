#include "auprobe/network.hpp"

#include "auprobe/error.hpp"

#include <algorithm>
#include <cmath>

namespace auprobe {

std::string to_string(InitMode mode) { return mode == InitMode::paper ? "paper" : "scaled"; }

InitMode parse_init_mode(const std::string& text) {
    if (text == "paper") return InitMode::paper;
    if (text == "scaled") return InitMode::scaled;
    throw DataError("unknown init_mode '" + text + "' (expected paper or scaled)");
}

void ModelConfig::validate() const {
    if (input_size < 8) throw ShapeError("input_size must be at least 8");
    if (conv_channels.empty()) throw ShapeError("conv_channels must not be empty");
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
        if (conv_channels[i] == 0) throw ShapeError("conv_channels entries must be positive");
        if (i > 0 && conv_channels[i] <= conv_channels[i - 1])
            throw ShapeError("conv_channels must be strictly increasing");
    }
    if (kernel_size % 2 == 0) throw ShapeError("kernel_size must be odd");
    if (fc_hidden == 0) throw ShapeError("fc_hidden must be positive");
    if (num_classes < 2) throw ShapeError("num_classes must be at least 2");
}

std::string layer_kind(const Layer& layer) {
    struct Visitor {
        std::string operator()(const ConvLayer&) const { return "conv"; }
        std::string operator()(const ReluLayer&) const { return "relu"; }
        std::string operator()(const MaxPoolLayer&) const { return "maxpool"; }
        std::string operator()(const FCLayer&) const { return "fc"; }
        std::string operator()(const DropoutLayer&) const { return "dropout"; }
    };
    return std::visit(Visitor{}, layer);
}

void Network::add(std::string name, Layer layer) { layers_.push_back({std::move(name), std::move(layer)}); }

std::vector<Shape> Network::activation_shapes() const {
    std::vector<Shape> shapes{input_shape_};
    for (const auto& named : layers_) {
        const Shape& in = shapes.back();
        Shape out = in;
        if (const auto* conv = std::get_if<ConvLayer>(&named.layer)) {
            if (in.size() != 3 || in[0] != conv->in_channels())
                throw ShapeError("layer " + named.name + " cannot take input " + shape_string(in));
            out = {conv->out_channels(), in[1], in[2]};
        } else if (std::holds_alternative<MaxPoolLayer>(named.layer)) {
            if (in.size() != 3) throw ShapeError("layer " + named.name + " needs a [C,H,W] input");
            out = {in[0], (in[1] + 1) / 2, (in[2] + 1) / 2};
        } else if (const auto* fc = std::get_if<FCLayer>(&named.layer)) {
            if (shape_product(in) != fc->in_features())
                throw ShapeError("layer " + named.name + " cannot take input " + shape_string(in));
            out = {fc->out_features()};
        }
        shapes.push_back(std::move(out));
    }
    return shapes;
}

ForwardTrace Network::forward(const Tensor& image, const ForwardOptions& options) const {
    if (image.shape() != input_shape_)
        throw ShapeError("network expects input " + shape_string(input_shape_) + ", got " +
                         shape_string(image.shape()));
    ForwardTrace trace;
    trace.activations.reserve(layers_.size() + 1);
    trace.activations.push_back(image);
    trace.switches.resize(layers_.size());
    trace.dropout_masks.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Tensor& in = trace.activations.back();
        const Layer& layer = layers_[i].layer;
        Tensor out;
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            out = conv_forward(in, *conv);
        } else if (std::holds_alternative<ReluLayer>(layer)) {
            out = relu_forward(in);
        } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
            auto pooled = maxpool_forward(in);
            out = std::move(pooled.output);
            trace.switches[i] = std::move(pooled.switches);
        } else if (const auto* fc = std::get_if<FCLayer>(&layer)) {
            out = fc_forward(in, *fc);
        } else {
            if (options.training && options.dropout_p > 0) {
                if (!options.rng) throw ShapeError("training-mode dropout requires a generator");
                Tensor mask = dropout_mask(in.shape(), options.dropout_p, *options.rng);
                out = elementwise_mul(in, mask);
                trace.dropout_masks[i] = std::move(mask);
            } else {
                out = in;
            }
        }
        trace.activations.push_back(std::move(out));
    }
    return trace;
}

Tensor Network::backward(const ForwardTrace& trace, const Tensor& grad_logits, Gradients& grads) const {
    if (trace.activations.size() != layers_.size() + 1) throw ShapeError("trace does not belong to this network");
    if (grads.size() != parameters().size()) throw ShapeError("gradient set does not match parameters");
    Tensor grad = grad_logits;
    std::size_t param = grads.size();
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Tensor& in = trace.activations[i];
        const Layer& layer = layers_[i].layer;
        if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
            param -= 2;
            grad = conv_backward(grad, in, *conv, grads[param], grads[param + 1]);
        } else if (std::holds_alternative<ReluLayer>(layer)) {
            grad = relu_backward(grad, in);
        } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
            grad = maxpool_backward(grad, *trace.switches[i]);
        } else if (const auto* fc = std::get_if<FCLayer>(&layer)) {
            param -= 2;
            grad = fc_backward(grad, in, *fc, grads[param], grads[param + 1]);
        } else if (trace.dropout_masks[i]) {
            grad = elementwise_mul(grad, *trace.dropout_masks[i]);
        }
    }
    return grad;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& named : layers_) {
        if (auto* conv = std::get_if<ConvLayer>(&named.layer)) {
            out.push_back(&conv->kernels);
            out.push_back(&conv->bias);
        } else if (auto* fc = std::get_if<FCLayer>(&named.layer)) {
            out.push_back(&fc->weights);
            out.push_back(&fc->bias);
        }
    }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (auto* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
    return out;
}

std::vector<std::string> Network::parameter_names() const {
    std::vector<std::string> out;
    for (const auto& named : layers_) {
        if (std::holds_alternative<ConvLayer>(named.layer)) {
            out.push_back(named.name + ".kernels");
            out.push_back(named.name + ".bias");
        } else if (std::holds_alternative<FCLayer>(named.layer)) {
            out.push_back(named.name + ".weights");
            out.push_back(named.name + ".bias");
        }
    }
    return out;
}

Gradients Network::zero_gradients() const {
    Gradients grads;
    for (const auto* p : parameters()) grads.emplace_back(p->shape());
    return grads;
}

std::size_t Network::conv_block_count() const {
    return static_cast<std::size_t>(std::count_if(layers_.begin(), layers_.end(), [](const NamedLayer& l) {
        return std::holds_alternative<ConvLayer>(l.layer);
    }));
}

std::size_t Network::block_output(std::size_t block) const {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!std::holds_alternative<ConvLayer>(layers_[i].layer)) continue;
        if (++seen != block) continue;
        std::size_t j = i;
        while (j + 1 < layers_.size() && (std::holds_alternative<ReluLayer>(layers_[j + 1].layer) ||
                                          std::holds_alternative<MaxPoolLayer>(layers_[j + 1].layer)))
            ++j;
        return j + 1;
    }
    throw ShapeError("network has no conv block " + std::to_string(block));
}

Network build(const ModelConfig& config) {
    config.validate();
    Network net({1, config.input_size, config.input_size});
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto init = [&](Tensor& weights, std::size_t fan_in) {
        const double s = config.init_mode == InitMode::scaled ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
        for (auto& w : weights.values()) w = static_cast<real>(gauss(rng) * s);
    };

    std::size_t channels = 1, extent = config.input_size;
    const std::size_t k = config.kernel_size;
    for (std::size_t b = 0; b < config.conv_channels.size(); ++b) {
        const auto id = std::to_string(b + 1);
        auto conv = ConvLayer::create(channels, config.conv_channels[b], k);
        init(conv.kernels, channels * k * k);
        net.add("conv" + id, std::move(conv));
        net.add("relu" + id, ReluLayer{});
        net.add("pool" + id, MaxPoolLayer{});
        channels = config.conv_channels[b];
        extent = (extent + 1) / 2;
    }
    const std::size_t flat = channels * extent * extent;
    auto hidden = FCLayer::create(flat, config.fc_hidden);
    init(hidden.weights, flat);
    net.add("fc1", std::move(hidden));
    net.add("relu_fc1", ReluLayer{});
    net.add("dropout", DropoutLayer{});
    auto classifier = FCLayer::create(config.fc_hidden, config.num_classes);
    init(classifier.weights, config.fc_hidden);
    net.add("fc2", std::move(classifier));
    net.config = config;
    return net;
}

ForwardTrace forward_trace(const Network& net, const Tensor& image, std::string image_id) {
    ForwardTrace trace = net.forward(image);
    trace.image_id = std::move(image_id);
    return trace;
}

std::size_t predict(const Network& net, const Tensor& image) {
    const Tensor logits = net.forward(image).logits();
    auto v = logits.values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace auprobe
