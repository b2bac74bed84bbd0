#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hashnet/dataset.hpp"
#include "hashnet/network.hpp"

namespace hashnet {

/// Training hyperparameters. Defaults are the published recipe: lr 0.01
/// decayed to a tenth every 10,000 iterations, 30,000 iterations total,
/// mini-batches of 32.
struct TrainConfig {
    double initial_lr = 0.01;
    double decay_factor = 0.1;
    std::size_t decay_interval = 10000;
    std::size_t max_iterations = 30000;
    std::size_t batch_size = 32;
    double momentum = 0.0;  // optional extension; plain SGD when 0
    std::uint64_t seed = 1;
    std::size_t log_every = 100;
};

void validate(const TrainConfig& config);

/// Piecewise-constant schedule:
/// initial_lr * decay_factor^floor(iteration / decay_interval).
double lr_at(const TrainConfig& config, std::size_t iteration);

/// One plain SGD step: forward, mean cross-entropy over the batch,
/// backward, p <- p - lr * grad (results kept on the f32 grid). Returns
/// the batch loss. Throws DivergenceError on a non-finite loss.
double sgd_step(Network& net, const Tensor& batch, const std::vector<std::size_t>& labels,
                double lr);

struct LogEntry {
    std::size_t iteration = 0;  // 0-based index of the last completed step
    double lr = 0.0;
    double mean_loss = 0.0;  // mean over the window since the previous entry
};

struct TrainLog {
    std::vector<LogEntry> entries;

    /// One line per entry: `iter <n> lr <lr> loss <mean>`.
    std::string to_text() const;
};

/// Runs max_iterations SGD steps over the dataset with seeded reshuffling
/// at each epoch boundary. Deterministic for a fixed (net, dataset,
/// config). Advances net.step by one per iteration.
TrainLog train(Network& net, const Dataset& data, const TrainConfig& config);

/// Fraction of items whose argmax logit equals their label (inference
/// mode).
double classify_accuracy(const Network& net, const Dataset& data);

} // namespace hashnet
