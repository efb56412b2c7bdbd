#include "auprobe/error.hpp"
#include "auprobe/layers.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace auprobe;

namespace {

ConvLayer random_conv(std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng) {
    auto layer = ConvLayer::create(in, out, k);
    layer.kernels = oracle::random_tensor(layer.kernels.shape(), rng);
    layer.bias = oracle::random_tensor(layer.bias.shape(), rng);
    return layer;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a[i] - b[i])));
    return worst;
}

}  // namespace

TEST_CASE("conv_forward agrees with the direct loop nest") {
    std::mt19937_64 rng(1);
    struct Case {
        std::size_t in, out, k, h, w;
    };
    for (const Case c : {Case{1, 1, 5, 7, 7}, Case{3, 4, 5, 9, 6}, Case{2, 5, 3, 4, 8}, Case{4, 2, 1, 5, 5}}) {
        const auto layer = random_conv(c.in, c.out, c.k, rng);
        const Tensor x = oracle::random_tensor({c.in, c.h, c.w}, rng);
        CHECK(max_abs_diff(conv_forward(x, layer), oracle::conv_direct(x, layer.kernels, layer.bias)) < 1e-12);
    }
}

TEST_CASE("conv rejects even kernels and mismatched channels") {
    CHECK_THROWS_AS(ConvLayer::create(1, 2, 4), ShapeError);
    std::mt19937_64 rng(2);
    const auto layer = random_conv(2, 3, 3, rng);
    CHECK_THROWS_AS(conv_forward(Tensor({3, 5, 5}), layer), ShapeError);
}

TEST_CASE("fold_patches is the adjoint of unroll_patches") {
    std::mt19937_64 rng(3);
    const Tensor x = oracle::random_tensor({3, 6, 5}, rng);
    const Tensor cols = unroll_patches(x, 5);
    CHECK(cols.shape() == Shape{3 * 25, 30});
    const Tensor y = oracle::random_tensor(cols.shape(), rng);
    const double lhs = inner_product(cols, y);
    const double rhs = inner_product(x, fold_patches(y, x.shape(), 5));
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::sqrt(double(squared_norm(x) * squared_norm(y))));
}

TEST_CASE("conv_backward input gradient is conv_transpose; parameter gradients match finite differences") {
    std::mt19937_64 rng(4);
    auto layer = random_conv(2, 3, 3, rng);
    const Tensor x = oracle::random_tensor({2, 5, 4}, rng);
    const Tensor g = oracle::random_tensor({3, 5, 4}, rng);
    Tensor kg(layer.kernels.shape()), bg(layer.bias.shape());
    const Tensor dx = conv_backward(g, x, layer, kg, bg);
    CHECK(max_abs_diff(dx, conv_transpose(g, layer, x.shape())) == 0);

    // L = <conv(x), g> so dL/dparam is the accumulated gradient.
    auto loss = [&] { return double(inner_product(conv_forward(x, layer), g)); };
    for (std::size_t i = 0; i < layer.kernels.size(); i += 5)
        CHECK(kg[i] == doctest::Approx(oracle::central_difference(&layer.kernels[i], 1e-5, loss)).epsilon(1e-7));
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
        CHECK(bg[i] == doctest::Approx(oracle::central_difference(&layer.bias[i], 1e-5, loss)).epsilon(1e-7));

    // Gradients accumulate across calls.
    conv_backward(g, x, layer, kg, bg);
    Tensor kg1(layer.kernels.shape()), bg1(layer.bias.shape());
    conv_backward(g, x, layer, kg1, bg1);
    CHECK(max_abs_diff(kg, scale(kg1, 2)) < 1e-12);
}

TEST_CASE("max pool agrees with a window scan, including odd extents") {
    std::mt19937_64 rng(5);
    for (const Shape s : {Shape{2, 4, 4}, Shape{3, 5, 7}, Shape{1, 1, 3}}) {
        const Tensor x = oracle::random_tensor(s, rng);
        const auto pooled = maxpool_forward(x);
        CHECK(pooled.output == oracle::maxpool_scan(x));
        for (std::size_t i = 0; i < pooled.output.size(); ++i)
            CHECK(x[pooled.switches.argmax[i]] == pooled.output[i]);
    }
}

TEST_CASE("max pool ties resolve to the first row-major position") {
    const Tensor x = Tensor::from_values({1, 2, 2}, {3, 3, 3, 3});
    const auto pooled = maxpool_forward(x);
    CHECK(pooled.switches.argmax[0] == 0);
    const Tensor y = Tensor::from_values({1, 2, 2}, {1, 4, 4, 2});
    CHECK(maxpool_forward(y).switches.argmax[0] == 1);
}

TEST_CASE("max pool backward routes each value to its switch") {
    std::mt19937_64 rng(6);
    const Tensor x = oracle::random_tensor({2, 4, 6}, rng);
    const auto pooled = maxpool_forward(x);
    const Tensor g = oracle::random_tensor(pooled.output.shape(), rng);
    const Tensor back = maxpool_backward(g, pooled.switches);
    CHECK(back.shape() == x.shape());
    double routed = 0;
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < back.size(); ++i) {
        routed += back[i];
        nonzero += back[i] != 0;
    }
    double total = 0;
    for (real v : g.values()) total += v;
    CHECK(routed == doctest::Approx(total));
    CHECK(nonzero == g.size());
    CHECK_THROWS_AS(maxpool_backward(Tensor({2, 3, 3}), pooled.switches), ShapeError);
}

TEST_CASE("relu forward and backward") {
    const Tensor x = Tensor::from_values({4}, {-1, 0, 2, -3});
    CHECK(relu_forward(x) == Tensor::from_values({4}, {0, 0, 2, 0}));
    const Tensor g = Tensor::from_values({4}, {5, 6, 7, 8});
    CHECK(relu_backward(g, x) == Tensor::from_values({4}, {0, 0, 7, 0}));
}

TEST_CASE("fully connected layer matches a loop and finite differences") {
    std::mt19937_64 rng(7);
    auto fc = FCLayer::create(12, 5);
    fc.weights = oracle::random_tensor(fc.weights.shape(), rng);
    fc.bias = oracle::random_tensor(fc.bias.shape(), rng);
    const Tensor x = oracle::random_tensor({3, 2, 2}, rng);
    const Tensor y = fc_forward(x, fc);
    for (std::size_t o = 0; o < 5; ++o) {
        double s = fc.bias[o];
        for (std::size_t i = 0; i < 12; ++i) s += fc.weights[o * 12 + i] * x[i];
        CHECK(y[o] == doctest::Approx(s));
    }
    const Tensor g = oracle::random_tensor({5}, rng);
    Tensor wg(fc.weights.shape()), bg(fc.bias.shape());
    const Tensor dx = fc_backward(g, x, fc, wg, bg);
    CHECK(dx.shape() == x.shape());
    Tensor xv = x;
    auto loss = [&] { return double(inner_product(fc_forward(xv, fc), g)); };
    for (std::size_t i = 0; i < 12; ++i)
        CHECK(dx[i] == doctest::Approx(oracle::central_difference(&xv[i], 1e-5, loss)).epsilon(1e-7));
    for (std::size_t i = 0; i < fc.weights.size(); i += 7)
        CHECK(wg[i] == doctest::Approx(oracle::central_difference(&fc.weights[i], 1e-5, loss)).epsilon(1e-7));
    CHECK_THROWS_AS(fc_forward(Tensor({11}), fc), ShapeError);
}

TEST_CASE("softmax is normalized and stable for large logits") {
    const Tensor p = softmax(Tensor::from_values({3}, {1000, 1001, 1002}));
    double s = 0;
    for (real v : p.values()) {
        CHECK(std::isfinite(v));
        s += v;
    }
    CHECK(s == doctest::Approx(1));
    CHECK(p[2] > p[1]);
}

TEST_CASE("softmax cross entropy value and gradient") {
    const Tensor logits = Tensor::from_values({3}, {0.5, -1, 2});
    const auto ce = softmax_cross_entropy(logits, 1);
    const double z = std::exp(0.5) + std::exp(-1.0) + std::exp(2.0);
    CHECK(ce.loss == doctest::Approx(-std::log(std::exp(-1.0) / z)));
    CHECK(ce.grad_logits[1] == doctest::Approx(std::exp(-1.0) / z - 1));
    CHECK(ce.grad_logits[0] == doctest::Approx(std::exp(0.5) / z));
    CHECK_THROWS_AS(softmax_cross_entropy(logits, 3), ShapeError);
}

TEST_CASE("dropout keeps about half and rescales survivors") {
    std::mt19937_64 rng(8);
    const Tensor mask = dropout_mask({100000}, real(0.5), rng);
    std::size_t kept = 0;
    for (real v : mask.values()) {
        CHECK((v == 0 || v == 2));
        kept += v != 0;
    }
    const double fraction = double(kept) / double(mask.size());
    CHECK(fraction > 0.48);
    CHECK(fraction < 0.52);
    const Tensor none = dropout_mask({10}, 0, rng);
    CHECK(none == Tensor::ones({10}));
}
