#include "auprobe/layers.hpp"

#include "auprobe/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auprobe {

ConvLayer ConvLayer::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size) {
    if (kernel_size % 2 == 0) throw ShapeError("conv kernel size must be odd for same padding");
    ConvLayer layer;
    layer.kernels = Tensor({out_channels, in_channels, kernel_size, kernel_size});
    layer.bias = Tensor({out_channels});
    layer.kernel_grad = Tensor(layer.kernels.shape());
    layer.bias_grad = Tensor(layer.bias.shape());
    return layer;
}

void ConvLayer::zero_grad() {
    kernel_grad.fill(0);
    bias_grad.fill(0);
}

FCLayer FCLayer::create(std::size_t in_features, std::size_t out_features) {
    FCLayer layer;
    layer.weights = Tensor({out_features, in_features});
    layer.bias = Tensor({out_features});
    layer.weight_grad = Tensor(layer.weights.shape());
    layer.bias_grad = Tensor(layer.bias.shape());
    return layer;
}

void FCLayer::zero_grad() {
    weight_grad.fill(0);
    bias_grad.fill(0);
}

static void require_chw(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw ShapeError(std::string(what) + ": expected a [C,H,W] tensor, got " + shape_string(t.shape()));
}

Tensor unroll_patches(const Tensor& input, std::size_t kernel_size) {
    require_chw(input, "unroll_patches");
    const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(kernel_size / 2);
    const std::size_t plane = height * width;
    Tensor cols({channels * kernel_size * kernel_size, plane});
    real* out = cols.data();
    for (std::size_t c = 0; c < channels; ++c) {
        const real* src = input.data() + c * plane;
        for (std::size_t u = 0; u < kernel_size; ++u) {
            for (std::size_t v = 0; v < kernel_size; ++v) {
                const auto du = static_cast<std::ptrdiff_t>(u) - pad;
                const auto dv = static_cast<std::ptrdiff_t>(v) - pad;
                for (std::size_t i = 0; i < height; ++i) {
                    const auto si = static_cast<std::ptrdiff_t>(i) + du;
                    real* row = out + i * width;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(height)) {
                        std::fill(row, row + width, real(0));
                        continue;
                    }
                    const real* srow = src + static_cast<std::size_t>(si) * width;
                    for (std::size_t j = 0; j < width; ++j) {
                        const auto sj = static_cast<std::ptrdiff_t>(j) + dv;
                        row[j] = (sj < 0 || sj >= static_cast<std::ptrdiff_t>(width)) ? real(0)
                                                                                       : srow[sj];
                    }
                }
                out += plane;
            }
        }
    }
    return cols;
}

Tensor fold_patches(const Tensor& cols, const Shape& input_shape, std::size_t kernel_size) {
    if (input_shape.size() != 3) throw ShapeError("fold_patches: expected a [C,H,W] target shape");
    const std::size_t channels = input_shape[0], height = input_shape[1], width = input_shape[2];
    const std::size_t plane = height * width;
    if (cols.size() != channels * kernel_size * kernel_size * plane)
        throw ShapeError("fold_patches: column buffer does not match " + shape_string(input_shape));
    const auto pad = static_cast<std::ptrdiff_t>(kernel_size / 2);
    Tensor image(input_shape);
    const real* in = cols.data();
    for (std::size_t c = 0; c < channels; ++c) {
        real* dst = image.data() + c * plane;
        for (std::size_t u = 0; u < kernel_size; ++u) {
            for (std::size_t v = 0; v < kernel_size; ++v) {
                const auto du = static_cast<std::ptrdiff_t>(u) - pad;
                const auto dv = static_cast<std::ptrdiff_t>(v) - pad;
                for (std::size_t i = 0; i < height; ++i) {
                    const auto si = static_cast<std::ptrdiff_t>(i) + du;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(height)) continue;
                    const real* row = in + i * width;
                    real* drow = dst + static_cast<std::size_t>(si) * width;
                    for (std::size_t j = 0; j < width; ++j) {
                        const auto sj = static_cast<std::ptrdiff_t>(j) + dv;
                        if (sj >= 0 && sj < static_cast<std::ptrdiff_t>(width)) drow[sj] += row[j];
                    }
                }
                in += plane;
            }
        }
    }
    return image;
}

static void require_conv_input(const Tensor& input, const ConvLayer& layer) {
    require_chw(input, "conv");
    if (input.dim(0) != layer.in_channels())
        throw ShapeError("conv: input has " + std::to_string(input.dim(0)) + " channels, layer expects " +
                         std::to_string(layer.in_channels()));
}

Tensor conv_forward(const Tensor& input, const ConvLayer& layer) {
    require_conv_input(input, layer);
    const std::size_t height = input.dim(1), width = input.dim(2), plane = height * width;
    const std::size_t k = layer.kernel_size();
    const std::size_t patch = layer.in_channels() * k * k;
    const std::size_t out_c = layer.out_channels();
    Tensor out({out_c, height, width});
    for (std::size_t o = 0; o < out_c; ++o)
        std::fill(out.data() + o * plane, out.data() + (o + 1) * plane, layer.bias[o]);
    const Tensor cols = unroll_patches(input, k);
    gemm(layer.kernels.values(), cols.values(), out.values(), out_c, plane, patch, false, false, true);
    return out;
}

static void require_grad_shape(const Tensor& grad_out, const Shape& input_shape, const ConvLayer& layer) {
    const Shape expected{layer.out_channels(), input_shape[1], input_shape[2]};
    if (grad_out.shape() != expected)
        throw ShapeError("conv backward: gradient shape " + shape_string(grad_out.shape()) +
                         " does not match forward output " + shape_string(expected));
}

Tensor conv_transpose(const Tensor& grad_out, const ConvLayer& layer, const Shape& input_shape) {
    if (input_shape.size() != 3 || input_shape[0] != layer.in_channels())
        throw ShapeError("conv_transpose: input shape " + shape_string(input_shape) + " does not fit layer");
    require_grad_shape(grad_out, input_shape, layer);
    const std::size_t k = layer.kernel_size();
    const std::size_t plane = input_shape[1] * input_shape[2];
    const std::size_t patch = layer.in_channels() * k * k;
    Tensor cols({patch, plane});
    gemm(layer.kernels.values(), grad_out.values(), cols.values(), patch, plane, layer.out_channels(), true,
         false, false);
    return fold_patches(cols, input_shape, k);
}

Tensor conv_backward(const Tensor& grad_out, const Tensor& saved_input, const ConvLayer& layer,
                     Tensor& kernel_grad, Tensor& bias_grad) {
    require_conv_input(saved_input, layer);
    require_grad_shape(grad_out, saved_input.shape(), layer);
    if (kernel_grad.shape() != layer.kernels.shape() || bias_grad.shape() != layer.bias.shape())
        throw ShapeError("conv backward: gradient buffers do not match layer parameters");
    const std::size_t k = layer.kernel_size();
    const std::size_t plane = saved_input.dim(1) * saved_input.dim(2);
    const std::size_t patch = layer.in_channels() * k * k;
    const std::size_t out_c = layer.out_channels();

    const Tensor cols = unroll_patches(saved_input, k);
    gemm(grad_out.values(), cols.values(), kernel_grad.values(), out_c, patch, plane, false, true, true);
    for (std::size_t o = 0; o < out_c; ++o) {
        const real* g = grad_out.data() + o * plane;
        real sum = 0;
        for (std::size_t p = 0; p < plane; ++p) sum += g[p];
        bias_grad[o] += sum;
    }
    return conv_transpose(grad_out, layer, saved_input.shape());
}

Tensor conv_backward(const Tensor& grad_out, const Tensor& saved_input, ConvLayer& layer) {
    return conv_backward(grad_out, saved_input, layer, layer.kernel_grad, layer.bias_grad);
}

Tensor relu_forward(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.values()) v = v > 0 ? v : real(0);
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input) {
    if (grad_out.shape() != saved_input.shape()) throw ShapeError("relu_backward: shape mismatch");
    Tensor out = grad_out;
    auto in = saved_input.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i)
        if (!(in[i] > 0)) o[i] = 0;
    return out;
}

PoolResult maxpool_forward(const Tensor& x) {
    require_chw(x, "maxpool");
    const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);
    const std::size_t out_h = (height + 1) / 2, out_w = (width + 1) / 2;
    PoolResult result;
    result.output = Tensor({channels, out_h, out_w});
    result.switches.input_shape = x.shape();
    result.switches.output_shape = result.output.shape();
    result.switches.argmax.resize(result.output.size());
    std::size_t cell = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < out_h; ++i) {
            for (std::size_t j = 0; j < out_w; ++j, ++cell) {
                real best = -std::numeric_limits<real>::infinity();
                std::size_t best_at = 0;
                bool found = false;
                for (std::size_t di = 0; di < 2; ++di) {
                    const std::size_t r = 2 * i + di;
                    if (r >= height) continue;
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const std::size_t s = 2 * j + dj;
                        if (s >= width) continue;
                        const std::size_t at = (c * height + r) * width + s;
                        if (!found || x[at] > best) {
                            best = x[at];
                            best_at = at;
                            found = true;
                        }
                    }
                }
                result.output[cell] = best;
                result.switches.argmax[cell] = static_cast<std::uint32_t>(best_at);
            }
        }
    }
    return result;
}

Tensor maxpool_backward(const Tensor& grad_out, const SwitchRecord& switches) {
    if (grad_out.shape() != switches.output_shape || switches.argmax.size() != grad_out.size())
        throw ShapeError("maxpool_backward: gradient shape " + shape_string(grad_out.shape()) +
                         " does not match switch record " + shape_string(switches.output_shape));
    Tensor grad_in(switches.input_shape);
    for (std::size_t cell = 0; cell < grad_out.size(); ++cell) grad_in[switches.argmax[cell]] += grad_out[cell];
    return grad_in;
}

Tensor fc_forward(const Tensor& input, const FCLayer& layer) {
    if (input.size() != layer.in_features())
        throw ShapeError("fc: input has " + std::to_string(input.size()) + " values, layer expects " +
                         std::to_string(layer.in_features()));
    Tensor out = layer.bias;
    gemm(layer.weights.values(), input.values(), out.values(), layer.out_features(), 1, layer.in_features(),
         false, false, true);
    return out;
}

Tensor fc_backward(const Tensor& grad_out, const Tensor& saved_input, const FCLayer& layer,
                   Tensor& weight_grad, Tensor& bias_grad) {
    if (grad_out.size() != layer.out_features() || saved_input.size() != layer.in_features())
        throw ShapeError("fc backward: shape mismatch");
    if (weight_grad.shape() != layer.weights.shape() || bias_grad.shape() != layer.bias.shape())
        throw ShapeError("fc backward: gradient buffers do not match layer parameters");
    gemm(grad_out.values(), saved_input.values(), weight_grad.values(), layer.out_features(),
         layer.in_features(), 1, false, false, true);
    for (std::size_t o = 0; o < grad_out.size(); ++o) bias_grad[o] += grad_out[o];
    Tensor grad_in(saved_input.shape());
    gemm(layer.weights.values(), grad_out.values(), grad_in.values(), layer.in_features(), 1,
         layer.out_features(), true, false, false);
    return grad_in;
}

Tensor fc_backward(const Tensor& grad_out, const Tensor& saved_input, FCLayer& layer) {
    return fc_backward(grad_out, saved_input, layer, layer.weight_grad, layer.bias_grad);
}

Tensor dropout_mask(const Shape& shape, real p, std::mt19937_64& rng) {
    if (!(p >= 0 && p < 1)) throw ShapeError("dropout probability must be in [0,1)");
    Tensor mask(shape);
    std::bernoulli_distribution drop(static_cast<double>(p));
    const real keep_scale = real(1) / (real(1) - p);
    for (auto& v : mask.values()) v = drop(rng) ? real(0) : keep_scale;
    return mask;
}

Tensor softmax(const Tensor& logits) {
    Tensor p = logits;
    const real top = *std::max_element(p.values().begin(), p.values().end());
    real sum = 0;
    for (auto& v : p.values()) {
        v = std::exp(v - top);
        sum += v;
    }
    for (auto& v : p.values()) v /= sum;
    return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (label >= logits.size())
        throw ShapeError("label " + std::to_string(label) + " outside class range [0," +
                         std::to_string(logits.size()) + ")");
    // log-sum-exp form keeps the loss accurate when p[label] is close to 1
    const real top = *std::max_element(logits.values().begin(), logits.values().end());
    real sum = 0;
    for (auto v : logits.values()) sum += std::exp(v - top);
    const real log_z = top + std::log(sum);
    LossResult result{log_z - logits[label], softmax(logits)};
    result.grad_logits[label] -= 1;
    return result;
}

}  // namespace auprobe
