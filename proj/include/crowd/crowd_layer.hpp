#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowd/annotations.hpp"
#include "crowd/dataset.hpp"
#include "crowd/graph.hpp"
#include "crowd/trainer.hpp"
#include "json.hpp"

namespace crowd {

// Per-annotator output mappings. Classification variants act on the
// bottleneck simplex row sigma and are followed by a softmax:
//   mw:  a = W sigma          (full C x C matrix)
//   vw:  a = w ⊙ sigma        (per-class weights)
//   vwb: a = w ⊙ sigma + b
// Regression variants map the scalar bottleneck mu directly:
//   s:   o = s * mu
//   b:   o = mu + b
//   sb:  o = s * mu + b
enum class CrowdVariant { mw, vw, vwb, s, b, sb };

CrowdVariant crowd_variant_from_string(const std::string& s);
std::string to_string(CrowdVariant v);
bool is_classification_variant(CrowdVariant v);

// Trainable annotator mappings, identity-initialized: W = I, w = 1, b = 0,
// s = 1, so the crowd layer is a no-op before the first update.
class CrowdParams {
 public:
  CrowdParams() = default;
  // num_classes is ignored by the regression variants.
  CrowdParams(CrowdVariant variant, std::size_t num_annotators,
              std::size_t num_classes);

  CrowdVariant variant() const { return variant_; }
  std::size_t num_annotators() const { return num_annotators_; }
  std::size_t num_classes() const { return num_classes_; }

  // Parameter accessors; each requires that the variant uses the role.
  const Tensor& matrix(std::size_t r) const;        // mw: C x C
  const Tensor& weight_vector(std::size_t r) const;  // vw, vwb: length C
  const Tensor& bias_vector(std::size_t r) const;    // vwb: length C
  double scale(std::size_t r) const;                 // s, sb
  double bias(std::size_t r) const;                  // b, sb

  std::vector<NamedParam> params();
  void zero_grad();

  // Adds l2 * (p - p_identity) to every parameter gradient and returns the
  // penalty value l2/2 * sum of squared deviations from identity.
  double add_identity_pull(double l2);

  nlohmann::json to_json() const;
  static CrowdParams from_json(const nlohmann::json& j);

 private:
  friend Tensor crowd_backward(CrowdParams&, const Tensor&,
                               const AnnotationTable&, double*);
  CrowdVariant variant_ = CrowdVariant::mw;
  std::size_t num_annotators_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<Tensor> values_;  // one tensor per (annotator, role)
  std::vector<Tensor> grads_;
  std::vector<std::string> names_;

  std::size_t roles() const;
  std::size_t slot(std::size_t r, std::size_t role) const;
};

// Prediction the crowd layer makes for one annotator over a batch of
// bottleneck rows (simplex rows for classification, an N x 1 column for
// regression). Classification output rows are softmax distributions over the
// annotator's answers.
Tensor crowd_forward_one(const CrowdParams& params, const Tensor& bottleneck,
                         std::size_t annotator);

// Mean loss over observed (item, annotator) pairs: cross-entropy against the
// annotator's label, or squared error against the answer. Missing cells
// contribute exactly zero. Rejects a batch with no observed pairs.
double crowd_loss(const CrowdParams& params, const Tensor& bottleneck,
                  const AnnotationTable& labels);

// Accumulates parameter gradients and returns dLoss/dBottleneck. Annotators
// with no observed labels in the batch receive exactly-zero gradients. The
// loss value is written to loss_out when non-null.
Tensor crowd_backward(CrowdParams& params, const Tensor& bottleneck,
                      const AnnotationTable& labels,
                      double* loss_out = nullptr);

// The prediction network is the trained bottleneck network with the crowd
// mappings dropped; the copy shares nothing with training state.
Graph strip(const Graph& trained_network);

struct CrowdTrainResult {
  Graph network;
  CrowdParams params;
  TrainLog log;
};

// Joint training of the bottleneck network and the crowd mappings.
// crowd_learning_rate 0 shares the network's rate; identity_l2 0 disables the
// optional pull toward the identity initialization.
CrowdTrainResult train_crowd(const NetworkSpec& net_spec, const Dataset& train,
                             CrowdVariant variant, const TrainOptions& opts,
                             const Dataset* eval_set,
                             double crowd_learning_rate = 0.0,
                             double identity_l2 = 0.0);

}  // namespace crowd
