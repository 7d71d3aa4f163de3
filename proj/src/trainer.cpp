#include "crowd/trainer.hpp"

#include <cmath>

#include "crowd/aggregation.hpp"
#include "crowd/metrics.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

constexpr std::uint64_t kTagShuffle = 0x73687566;
constexpr std::uint64_t kTagDropout = 0x64726f70;
constexpr std::uint64_t kTagNetInit = 0x6e6574;

}  // namespace

std::uint64_t network_init_seed(std::uint64_t run_seed) {
  return mix64(run_seed, kTagNetInit);
}

Graph build_network(const NetworkSpec& spec, std::uint64_t run_seed) {
  return build_mlp(spec, network_init_seed(run_seed));
}

std::uint64_t batch_seed(std::uint64_t seed, std::size_t epoch,
                         std::size_t batch) {
  return mix64(mix64(seed, kTagDropout + epoch), batch);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::size_t epoch) {
  require(n > 0, "epoch_batches: empty dataset");
  require(batch_size > 0, "epoch_batches: batch_size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix64(mix64(seed, kTagShuffle), epoch));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  require(x.ndim() == 2, "take_rows: expected a rank-2 tensor");
  Tensor out = Tensor::matrix(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < x.rows(), "take_rows: row ", rows[i], " out of ",
            x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j)
      out.at(i, j) = x.at(rows[i], j);
  }
  return out;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  require(num_classes > 0, "one_hot: num_classes must be positive");
  Tensor out = Tensor::zeros({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 &&
                static_cast<std::size_t>(labels[i]) < num_classes,
            "one_hot: label ", labels[i], " out of range [0, ", num_classes,
            ")");
    out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

namespace {

double train_one_epoch(Graph& net, Optimizer& opt, const Tensor& x,
                       const Tensor& targets, std::size_t batch_size,
                       std::uint64_t seed, std::size_t epoch, bool soft) {
  require(x.rows() == targets.rows(), "train epoch: ", x.rows(),
          " inputs vs ", targets.rows(), " target rows");
  const std::size_t n = x.rows();
  const auto batches = epoch_batches(n, batch_size, seed, epoch);
  double total_loss = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Tensor xb = take_rows(x, batches[b]);
    const Tensor tb = take_rows(targets, batches[b]);
    net.reseed_dropout(batch_seed(seed, epoch, b));
    net.zero_grad();
    const Tensor out = net.forward(xb, true);
    double loss;
    Tensor grad;
    if (soft) {
      loss = cross_entropy_soft(out, tb);
      grad = cross_entropy_soft_grad(out, tb);
    } else {
      loss = mse(out, tb);
      grad = mse_grad(out, tb);
    }
    require(std::isfinite(loss), "training diverged at epoch ", epoch,
            ", batch ", b, ": non-finite loss");
    net.backward(grad);
    opt.step(net);
    total_loss += loss * static_cast<double>(batches[b].size());
  }
  return total_loss / static_cast<double>(n);
}

}  // namespace

double train_one_epoch_soft(Graph& net, Optimizer& opt, const Tensor& x,
                            const Tensor& targets, std::size_t batch_size,
                            std::uint64_t seed, std::size_t epoch) {
  return train_one_epoch(net, opt, x, targets, batch_size, seed, epoch, true);
}

double train_one_epoch_mse(Graph& net, Optimizer& opt, const Tensor& x,
                           const Tensor& targets, std::size_t batch_size,
                           std::uint64_t seed, std::size_t epoch) {
  return train_one_epoch(net, opt, x, targets, batch_size, seed, epoch,
                         false);
}

std::vector<int> predict_labels(Graph& net, const Tensor& x) {
  return hard_labels(net.forward(x, false));
}

std::vector<double> predict_values(Graph& net, const Tensor& x) {
  const Tensor out = net.forward(x, false);
  std::vector<double> values(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) values[i] = out.at(i, 0);
  return values;
}

double eval_metric(Graph& net, const Dataset& eval_set) {
  require(eval_set.has_gold, "eval_metric: the evaluation set has no gold");
  if (eval_set.kind == TaskKind::regression)
    return root_mean_squared_error(predict_values(net, eval_set.features),
                                   eval_set.gold_values);
  return accuracy(predict_labels(net, eval_set.features),
                  eval_set.gold_labels);
}

TrainLog train_supervised(Graph& net, const Tensor& x, const Tensor& targets,
                          bool classification, const TrainOptions& opts,
                          const Dataset* eval_set) {
  Optimizer opt(opts.optimizer);
  TrainLog log;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = classification
                     ? train_one_epoch_soft(net, opt, x, targets,
                                            opts.batch_size, opts.seed, epoch)
                     : train_one_epoch_mse(net, opt, x, targets,
                                           opts.batch_size, opts.seed, epoch);
    if (eval_set != nullptr) {
      entry.has_metric = true;
      entry.metric = eval_metric(net, *eval_set);
    }
    log.push_back(entry);
  }
  return log;
}

}  // namespace crowd
