#pragma once

#include "auprobe/layers.hpp"
#include "auprobe/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace auprobe {

enum class InitMode { paper, scaled };

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

/// Architecture of the expression network: three conv/ReLU/pool blocks,
/// a hidden fully connected layer with dropout, and a softmax classifier.
struct ModelConfig {
    std::size_t input_size = 96;
    std::vector<std::size_t> conv_channels{64, 128, 256};
    std::size_t kernel_size = 5;
    std::size_t fc_hidden = 1024;
    std::size_t num_classes = 8;
    InitMode init_mode = InitMode::scaled;
    std::uint64_t seed = 1;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ReluLayer {};
struct MaxPoolLayer {};
/// Inverted dropout. The probability comes from the forward options, so the
/// layer is the identity in inference mode.
struct DropoutLayer {};

using Layer = std::variant<ConvLayer, ReluLayer, MaxPoolLayer, FCLayer, DropoutLayer>;

struct NamedLayer {
    std::string name;
    Layer layer;
};

std::string layer_kind(const Layer& layer);

/// Everything the forward pass produced for one image.
/// activations[0] is the input; activations[i + 1] is the output of layer i.
struct ForwardTrace {
    std::string image_id;
    std::vector<Tensor> activations;
    std::vector<std::optional<SwitchRecord>> switches;     // indexed by layer
    std::vector<std::optional<Tensor>> dropout_masks;      // training mode only

    const Tensor& logits() const { return activations.back(); }
};

struct ForwardOptions {
    bool training = false;
    real dropout_p = real(0.5);
    std::mt19937_64* rng = nullptr;  // required when training with dropout
};

/// Parameter gradients in Network::parameters() order.
using Gradients = std::vector<Tensor>;

class Network {
public:
    Network() = default;
    explicit Network(Shape input_shape) : input_shape_(std::move(input_shape)) {}

    void add(std::string name, Layer layer);

    const Shape& input_shape() const { return input_shape_; }
    const std::vector<NamedLayer>& layers() const { return layers_; }
    std::vector<NamedLayer>& layers() { return layers_; }

    /// Shapes of every activation, starting with the input.
    std::vector<Shape> activation_shapes() const;

    ForwardTrace forward(const Tensor& image, const ForwardOptions& options = {}) const;

    /// Back-propagates grad_logits through a trace of this network and
    /// accumulates parameter gradients into `grads`. Returns the input gradient.
    Tensor backward(const ForwardTrace& trace, const Tensor& grad_logits, Gradients& grads) const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
    Gradients zero_gradients() const;

    /// Activation index of the output of conv block `block` (1-based): the
    /// last ReLU/pool that follows the block's conv before the next conv or FC.
    std::size_t block_output(std::size_t block) const;
    std::size_t conv_block_count() const;

    /// Build configuration, if the network came from build().
    std::optional<ModelConfig> config;
    /// Class names in logit order.
    std::vector<std::string> class_labels;

private:
    Shape input_shape_;
    std::vector<NamedLayer> layers_;
};

Network build(const ModelConfig& config);

/// Inference-mode trace of one image; checks the input shape against the network.
ForwardTrace forward_trace(const Network& net, const Tensor& image, std::string image_id = {});

/// Index of the largest logit; ties go to the smallest index.
std::size_t predict(const Network& net, const Tensor& image);

}  // namespace auprobe
