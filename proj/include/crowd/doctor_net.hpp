#pragma once

#include <cstdint>
#include <vector>

#include "crowd/dataset.hpp"
#include "crowd/graph.hpp"
#include "crowd/optim.hpp"
#include "crowd/tensor.hpp"
#include "crowd/trainer.hpp"

#include "json.hpp"

namespace crowd {

// Shared body feeding one head per annotator. The combination parameters sit
// idle during stage one; stage two (train_wdn_weights) fits them alone.
// Classification combines head probabilities with softmax(combo) weights;
// regression averages per-head outputs shifted by a per-annotator bias.
struct MultiHeadNetwork {
  Graph body;                // hidden blocks and dropout, no output layer
  std::vector<Graph> heads;  // dense head per annotator, softmax if classify
  Tensor combo;              // one entry per annotator, zeros at build time
  Tensor combo_grad;
  bool classification = true;
  std::size_t num_classes = 0;

  std::size_t num_annotators() const { return heads.size(); }
  // Body and head parameters followed by the combination parameter.
  std::vector<NamedParam> params();
  void zero_grad();

  nlohmann::json to_json(const NetworkSpec& spec);
  static MultiHeadNetwork from_json(const nlohmann::json& j);
};

// Body weights and the first head reproduce build_mlp(spec, seed) exactly,
// so a one-annotator model trains like the plain supervised network.
MultiHeadNetwork build_multi_head(const NetworkSpec& spec,
                                  std::size_t num_annotators,
                                  std::uint64_t seed);

struct DnTrainResult {
  MultiHeadNetwork model;
  TrainLog log;
};

// Stage one: every head learns its own annotator's answers under the masked
// loss (absent cells contribute nothing, normalizer is the batch answer
// count); the body receives the summed head gradients. Combination
// parameters are untouched.
DnTrainResult train_dn(const NetworkSpec& net_spec, const Dataset& train,
                       const TrainOptions& opts,
                       const Dataset* eval_set = nullptr);

// Stage two: fits only the combination parameters to the crowd labels at
// frozen eval-mode head outputs. Body and head parameters are bit-unchanged.
TrainLog train_wdn_weights(MultiHeadNetwork& model, const Dataset& train,
                           const TrainOptions& opts,
                           const Dataset* eval_set = nullptr);

// weighted = false: majority vote over per-head argmax labels (ties to the
// lowest label) / unweighted mean of head outputs. weighted = true: the
// learned combination, then argmax / value.
std::vector<int> predict_dn_labels(MultiHeadNetwork& model, const Tensor& x,
                                   bool weighted);
std::vector<double> predict_dn_values(MultiHeadNetwork& model,
                                      const Tensor& x, bool weighted);

// Held-out metric matching eval_metric: accuracy (percent) or RMSE.
double eval_dn_metric(MultiHeadNetwork& model, const Dataset& eval_set,
                      bool weighted);

}  // namespace crowd
