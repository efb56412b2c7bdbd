#pragma once

#include "auprobe/tensor.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace auprobe {

/// Square-kernel convolution with stride 1 and same-size zero padding.
///
/// The forward pass is computed as a matrix product over unrolled input
/// patches: with `cols = unroll(x)` of shape [C*K*K, H*W], the output is
/// `kernels[O, C*K*K] * cols + bias`. That matrix is the linear operator C of
/// the layer, and the backward pass for the input applies its transpose.
struct ConvLayer {
    Tensor kernels;      // [out, in, k, k]
    Tensor bias;         // [out]
    Tensor kernel_grad;  // same shape as kernels
    Tensor bias_grad;    // same shape as bias

    static ConvLayer create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size = 5);

    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t in_channels() const { return kernels.dim(1); }
    std::size_t kernel_size() const { return kernels.dim(2); }
    std::size_t padding() const { return kernel_size() / 2; }

    void zero_grad();
};

struct FCLayer {
    Tensor weights;      // [out, in]
    Tensor bias;         // [out]
    Tensor weight_grad;
    Tensor bias_grad;

    static FCLayer create(std::size_t in_features, std::size_t out_features);

    std::size_t out_features() const { return weights.dim(0); }
    std::size_t in_features() const { return weights.dim(1); }

    void zero_grad();
};

/// Argmax bookkeeping of one 2x2 max-pool application on one input.
/// Each pooled cell stores the flat row-major offset of its winner in the
/// pre-pool activation.
struct SwitchRecord {
    Shape input_shape;   // [C, H, W] before pooling
    Shape output_shape;  // [C, ceil(H/2), ceil(W/2)]
    std::vector<std::uint32_t> argmax;

    friend bool operator==(const SwitchRecord&, const SwitchRecord&) = default;
};

struct PoolResult {
    Tensor output;
    SwitchRecord switches;
};

/// Unroll [C,H,W] into patch columns [C*K*K, H*W] for a same-padded stride-1 kernel.
Tensor unroll_patches(const Tensor& input, std::size_t kernel_size);
/// Adjoint of unroll_patches: scatter-add columns back to a [C,H,W] image.
Tensor fold_patches(const Tensor& cols, const Shape& input_shape, std::size_t kernel_size);

Tensor conv_forward(const Tensor& input, const ConvLayer& layer);
/// Pure transpose of the convolution operator, no bias: returns C^T * y shaped like the input.
Tensor conv_transpose(const Tensor& grad_out, const ConvLayer& layer, const Shape& input_shape);
/// Returns the input gradient and accumulates parameter gradients into the given buffers.
Tensor conv_backward(const Tensor& grad_out, const Tensor& saved_input, const ConvLayer& layer,
                     Tensor& kernel_grad, Tensor& bias_grad);
/// Same as above, accumulating into the layer's own gradient buffers.
Tensor conv_backward(const Tensor& grad_out, const Tensor& saved_input, ConvLayer& layer);

Tensor relu_forward(const Tensor& x);
/// Gradient is passed only where the saved input is strictly positive.
Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input);

/// 2x2 stride-2 max pool. Odd extents behave as if padded with -inf on the
/// bottom/right. Ties resolve to the first position in row-major order.
PoolResult maxpool_forward(const Tensor& x);
/// Routes each pooled value to its recorded switch; all other positions are zero.
/// This is also the unpooling step of the deconvnet.
Tensor maxpool_backward(const Tensor& grad_out, const SwitchRecord& switches);

/// Any-shaped input is treated as a flat vector of in_features values.
Tensor fc_forward(const Tensor& input, const FCLayer& layer);
Tensor fc_backward(const Tensor& grad_out, const Tensor& saved_input, const FCLayer& layer,
                   Tensor& weight_grad, Tensor& bias_grad);
Tensor fc_backward(const Tensor& grad_out, const Tensor& saved_input, FCLayer& layer);

/// Inverted dropout mask: each entry is 0 with probability p, else 1/(1-p).
Tensor dropout_mask(const Shape& shape, real p, std::mt19937_64& rng);

Tensor softmax(const Tensor& logits);

struct LossResult {
    real loss;
    Tensor grad_logits;
};

/// Cross entropy of one sample: loss = -log softmax(logits)[label].
LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label);

}  // namespace auprobe
