#pragma once

#include <cstdint>
#include <vector>

#include "crowd/dataset.hpp"
#include "crowd/graph.hpp"
#include "crowd/optim.hpp"
#include "crowd/rng.hpp"
#include "crowd/tensor.hpp"

namespace crowd {

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;  // drives shuffling and dropout masks
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  bool has_metric = false;
  double metric = 0.0;  // held-out accuracy (percent) or RMSE
  bool has_objective = false;
  double objective = 0.0;  // EM objective, when applicable
};

using TrainLog = std::vector<EpochLog>;

// Seed for the dropout masks of one batch; shared by every trainer so that
// composed pipelines reproduce standalone runs exactly.
std::uint64_t batch_seed(std::uint64_t seed, std::size_t epoch,
                         std::size_t batch);

// Shuffled index batches for one epoch. The shuffle derives from (seed,
// epoch) alone, so callers may run epochs one at a time.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::size_t epoch);

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& rows);
Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes);

// One epoch of mini-batch training toward soft simplex targets
// (cross-entropy) or real targets (mean squared error). Returns the
// row-weighted mean batch loss. epoch is the global epoch index: it keys the
// shuffle and dropout seeds.
double train_one_epoch_soft(Graph& net, Optimizer& opt, const Tensor& x,
                            const Tensor& targets, std::size_t batch_size,
                            std::uint64_t seed, std::size_t epoch);
double train_one_epoch_mse(Graph& net, Optimizer& opt, const Tensor& x,
                           const Tensor& targets, std::size_t batch_size,
                           std::uint64_t seed, std::size_t epoch);

std::vector<int> predict_labels(Graph& net, const Tensor& x);
std::vector<double> predict_values(Graph& net, const Tensor& x);

// Held-out metric for training logs: accuracy (percent) for classification
// and sequence tasks, RMSE for regression. The dataset must carry gold.
double eval_metric(Graph& net, const Dataset& eval_set);

// Network whose initial weights derive from the run seed alone, so training
// methods started from the same seed share their starting point.
// network_init_seed is the shared derivation for builders of other shapes.
std::uint64_t network_init_seed(std::uint64_t run_seed);
Graph build_network(const NetworkSpec& spec, std::uint64_t run_seed);

// Full supervised run: builds nothing, trains the given network in place.
// classification selects the loss (cross-entropy vs MSE). targets are one-hot
// or soft rows for classification, an N x 1 column for regression. eval_set
// may be null.
TrainLog train_supervised(Graph& net, const Tensor& x, const Tensor& targets,
                          bool classification, const TrainOptions& opts,
                          const Dataset* eval_set);

}  // namespace crowd
