#include "auprobe/train.hpp"

#include "auprobe/error.hpp"
#include "auprobe/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace auprobe {

void TrainConfig::validate() const {
    auto unit = [](real v) { return v > 0 && v <= 1; };
    if (batch_size == 0) throw DataError("batch_size must be positive");
    if (!(momentum >= 0 && momentum < 1)) throw DataError("momentum must be in [0,1)");
    if (!(weight_decay >= 0)) throw DataError("weight_decay must be >= 0");
    if (!(learning_rate >= 0 && learning_rate <= 1)) throw DataError("learning_rate must be in [0,1]");
    if (!(dropout_p >= 0 && dropout_p < 1)) throw DataError("dropout_p must be in [0,1)");
    if (target_train_acc != 0 && !unit(target_train_acc)) throw DataError("target_train_acc must be in (0,1]");
    if (epochs == 0) throw DataError("epochs must be positive");
    if (threads == 0) throw DataError("threads must be positive");
}

SgdMomentum::SgdMomentum(const Network& net, const TrainConfig& config)
    : lr_(config.learning_rate), momentum_(config.momentum), weight_decay_(config.weight_decay),
      velocity_(net.zero_gradients()) {}

void SgdMomentum::step(Network& net, const Gradients& grads) {
    auto params = net.parameters();
    if (grads.size() != params.size()) throw ShapeError("gradient count does not match parameters");
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p]->values();
        auto g = grads[p].values();
        auto v = velocity_[p].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = momentum_ * v[i] - lr_ * (g[i] + weight_decay_ * w[i]);
            w[i] += v[i];
        }
    }
}

real accuracy(const Network& net, const std::vector<Tensor>& inputs, const std::vector<std::size_t>& labels,
              std::size_t threads) {
    if (inputs.empty()) return std::numeric_limits<real>::quiet_NaN();
    std::vector<char> hit(inputs.size(), 0);
    parallel_for(inputs.size(), threads, [&](std::size_t i) { hit[i] = predict(net, inputs[i]) == labels[i]; });
    return static_cast<real>(std::count(hit.begin(), hit.end(), 1)) / static_cast<real>(inputs.size());
}

namespace {

struct EvalSet {
    std::vector<Tensor> inputs;
    std::vector<std::size_t> labels;
};

EvalSet make_eval_set(const std::vector<Example>& examples, std::size_t size, std::size_t threads) {
    EvalSet set;
    set.inputs.resize(examples.size());
    set.labels.resize(examples.size());
    parallel_for(examples.size(), threads, [&](std::size_t i) {
        set.inputs[i] = eval_transform(examples[i].image, size);
        set.labels[i] = examples[i].label;
    });
    return set;
}

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kSampleStream = 0x53414d504cULL;

}  // namespace

TrainResult train(Network& net, const std::vector<Example>& train_set, const std::vector<Example>* test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw DataError("training set is empty");
    const auto& in_shape = net.input_shape();
    if (in_shape.size() != 3 || in_shape[0] != 1 || in_shape[1] != in_shape[2])
        throw ShapeError("training expects a square single-channel network input");
    const std::size_t size = in_shape[1];
    const std::size_t classes = net.activation_shapes().back()[0];
    for (const auto& ex : train_set)
        if (ex.label >= classes)
            throw DataError("label " + std::to_string(ex.label) + " outside the " + std::to_string(classes) +
                            " network classes");

    const EvalSet train_eval = make_eval_set(train_set, size, config.threads);
    const EvalSet test_eval = test_set ? make_eval_set(*test_set, size, config.threads) : EvalSet{};

    SgdMomentum optimizer(net, config);
    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    real best_loss = std::numeric_limits<real>::infinity();
    std::size_t stale = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto shuffle_rng = derived_rng(config.seed, kShuffleStream, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        real loss_sum = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const std::size_t count = end - begin;
            // Fixed chunks per worker; chunk gradients are summed in chunk order.
            const std::size_t chunks = std::min(config.threads, count);
            std::vector<Gradients> chunk_grads(chunks);
            std::vector<real> chunk_loss(chunks, 0);
            parallel_for(chunks, chunks, [&](std::size_t c) {
                chunk_grads[c] = net.zero_gradients();
                const std::size_t lo = begin + count * c / chunks, hi = begin + count * (c + 1) / chunks;
                for (std::size_t pos = lo; pos < hi; ++pos) {
                    const Example& ex = train_set[order[pos]];
                    auto rng = derived_rng(config.seed, kSampleStream + epoch, pos);
                    const Tensor input = config.augment ? augment(ex.image, rng, size) : train_eval.inputs[order[pos]];
                    ForwardOptions options{true, config.dropout_p, &rng};
                    const ForwardTrace trace = net.forward(input, options);
                    auto [loss, grad] = softmax_cross_entropy(trace.logits(), ex.label);
                    chunk_loss[c] += loss;
                    net.backward(trace, grad, chunk_grads[c]);
                }
            });
            Gradients grads = std::move(chunk_grads[0]);
            for (std::size_t c = 1; c < chunks; ++c)
                for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += chunk_grads[c][p];
            for (auto& g : grads) g *= real(1) / static_cast<real>(count);
            real batch_loss = 0;
            for (auto l : chunk_loss) batch_loss += l;
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", samples " +
                                   std::to_string(begin) + ".." + std::to_string(end - 1));
            loss_sum += batch_loss;
            optimizer.step(net, grads);
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<real>(order.size());
        m.train_acc = accuracy(net, train_eval.inputs, train_eval.labels, config.threads);
        m.test_acc = accuracy(net, test_eval.inputs, test_eval.labels, config.threads);
        m.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(m);
        if (on_epoch) on_epoch(m);

        if (config.target_train_acc > 0 && m.train_acc >= config.target_train_acc) {
            result.stop_reason = "target_accuracy";
            return result;
        }
        if (best_loss - m.train_loss < config.convergence_tol)
            ++stale;
        else
            stale = 0;
        best_loss = std::min(best_loss, m.train_loss);
        if (stale >= config.convergence_patience) {
            result.stop_reason = "converged";
            return result;
        }
    }
    result.stop_reason = "epoch_cap";
    return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics log " + path.string());
    out << "epoch,train_loss,train_acc,test_acc,wallclock_s\n";
    out.precision(10);
    for (const auto& m : log) {
        out << m.epoch << ',' << m.train_loss << ',' << m.train_acc << ',';
        if (!std::isnan(m.test_acc)) out << m.test_acc;
        out << ',' << m.wallclock_s << '\n';
    }
}

}  // namespace auprobe
