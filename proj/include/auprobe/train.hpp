#pragma once

#include "auprobe/data.hpp"
#include "auprobe/network.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace auprobe {

struct TrainConfig {
    std::size_t batch_size = 64;
    real momentum = real(0.9);
    real weight_decay = real(0.0001);
    real learning_rate = real(0.001);
    real dropout_p = real(0.5);
    std::size_t epochs = 200;  // cap
    std::uint64_t seed = 1;
    bool augment = true;
    /// Stop once inference-mode training accuracy reaches this value; 0 disables.
    real target_train_acc = 0;
    /// Convergence: stop after `convergence_patience` consecutive epochs whose
    /// loss improves on the best so far by less than `convergence_tol`.
    real convergence_tol = real(1e-4);
    std::size_t convergence_patience = 5;
    std::size_t threads = 1;

    void validate() const;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    real train_loss = 0;
    real train_acc = 0;
    real test_acc = 0;  // NaN without a test set
    double wallclock_s = 0;
};

struct TrainResult {
    std::vector<EpochMetrics> log;
    std::string stop_reason;  // "converged", "target_accuracy", "epoch_cap"
};

/// SGD with momentum and L2 weight decay: v <- m*v - lr*(g + wd*w); w <- w + v.
class SgdMomentum {
public:
    SgdMomentum(const Network& net, const TrainConfig& config);
    /// `grads` holds gradients already averaged over the batch.
    void step(Network& net, const Gradients& grads);

private:
    real lr_, momentum_, weight_decay_;
    std::vector<Tensor> velocity_;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains in place. Per epoch the sample order is reshuffled from the run seed,
/// and every sample's augmentation and dropout draw from generators derived from
/// (seed, epoch, position) so runs replay exactly.
TrainResult train(Network& net, const std::vector<Example>& train_set, const std::vector<Example>* test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Fraction of `inputs` whose predicted class equals `labels`.
real accuracy(const Network& net, const std::vector<Tensor>& inputs, const std::vector<std::size_t>& labels,
              std::size_t threads = 1);

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::filesystem::path& path);

}  // namespace auprobe
