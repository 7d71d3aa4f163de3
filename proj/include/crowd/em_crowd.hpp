#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowd/annotations.hpp"
#include "crowd/dataset.hpp"
#include "crowd/graph.hpp"
#include "crowd/optim.hpp"
#include "crowd/tensor.hpp"
#include "crowd/trainer.hpp"

#include "json.hpp"

namespace crowd {

// Residual variance 1/lambda is floored here so a zero-residual annotator
// cannot acquire infinite weight.
inline constexpr double kVarianceFloor = 1e-6;

// Count of items whose posterior normalizer underflowed and was rescued by
// adding kLogFloor to every class before renormalizing.
struct EmStepStats {
  std::size_t floored_items = 0;
};

// Latent-truth state carried across epochs. Classification fills posteriors
// and confusions; regression fills targets and precisions.
struct EmState {
  Tensor posteriors;                // items x classes, row-stochastic
  std::vector<Tensor> confusions;   // per annotator, classes x classes
  std::vector<double> precisions;   // per annotator, > 0
  std::vector<double> targets;      // adjusted real target per item
  std::size_t epoch = 0;
  std::size_t em_schedule = 1;

  nlohmann::json to_json() const;
  static EmState from_json(const nlohmann::json& j);
};

// Posterior over the true class per item: network probability times each
// observed annotator's likelihood column, renormalized. Missing cells
// contribute nothing. Rows whose normalizer underflows are floored and
// counted in stats.
Tensor e_step_classification(const Tensor& class_probs,
                             const AnnotationTable& labels,
                             const std::vector<Tensor>& confusions,
                             EmStepStats* stats = nullptr);

// Per-sentence application of e_step_classification. class_probs rows and
// annotation rows are both token-level; sentence_lengths must cover them
// exactly.
Tensor e_step_sequence(const Tensor& class_probs,
                       const AnnotationTable& labels,
                       const std::vector<std::size_t>& sentence_lengths,
                       const std::vector<Tensor>& confusions,
                       EmStepStats* stats = nullptr);

// Posterior-weighted label counts per annotator with a Dirichlet pseudo-count
// of prior_strength on every cell, rows renormalized. Empty rows fall back to
// uniform.
std::vector<Tensor> m_step_confusions(const Tensor& posteriors,
                                      const AnnotationTable& labels,
                                      double prior_strength);

// Trains the network toward the posterior soft targets for the given number
// of epochs, resuming the caller's optimizer state. first_epoch keys the
// shuffle and dropout seeds. Returns the last epoch's mean loss (0 when
// steps = 0, network untouched).
double m_step_network(Graph& net, Optimizer& opt, const Tensor& features,
                      const Tensor& posteriors, std::size_t steps,
                      std::size_t batch_size, std::uint64_t seed,
                      std::size_t first_epoch);

// Observed-data objective the E/M alternation climbs: sum of per-item log
// marginals plus, when prior_strength > 0, the Dirichlet log-prior over all
// confusion cells.
double em_objective(const Tensor& class_probs, const AnnotationTable& labels,
                    const std::vector<Tensor>& confusions,
                    double prior_strength);

// One regression EM round as a pure function: precision per annotator from
// mean squared residuals against prev_targets (annotators with < 2 answers
// keep precision 1), then new targets as the precision-weighted mean of the
// observed answers and the network prediction at unit prior precision.
struct RegressionEmRound {
  std::vector<double> precisions;
  std::vector<double> targets;
};
RegressionEmRound regression_em_round(const AnnotationTable& labels,
                                      const std::vector<double>& predictions,
                                      const std::vector<double>& prev_targets);

struct EmTrainResult {
  Graph network;
  EmState state;
  TrainLog log;
};

// Joint training: posteriors start at the soft vote counts, confusions at
// their M-step fit; each epoch runs one network epoch on the current
// posteriors, then em_schedule rounds of (E, M) at the fresh eval-mode
// network outputs. The per-epoch objective is em_objective at those outputs.
EmTrainResult train_em_classification(const NetworkSpec& net_spec,
                                      const Dataset& train,
                                      std::size_t em_schedule,
                                      double prior_strength,
                                      const TrainOptions& opts,
                                      const Dataset* eval_set = nullptr);

// Sequence tasks use the fully factorized posterior: tokens are independent
// given the network, so training delegates to the flat classification EM.
EmTrainResult train_em_sequence(const NetworkSpec& net_spec,
                                const Dataset& train,
                                std::size_t em_schedule,
                                double prior_strength,
                                const TrainOptions& opts,
                                const Dataset* eval_set = nullptr);

// Regression EM: targets start at the per-item mean answer, precisions at 1;
// each epoch fits the network to the targets for one MSE epoch, then applies
// regression_em_round at the fresh predictions.
EmTrainResult train_em_regression(const NetworkSpec& net_spec,
                                  const Dataset& train,
                                  const TrainOptions& opts,
                                  const Dataset* eval_set = nullptr);

}  // namespace crowd
