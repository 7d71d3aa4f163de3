#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crowd/graph.hpp"
#include "crowd/tensor.hpp"

namespace crowd {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Applies SGD or Adam updates. Adam moments are keyed by parameter name so a
// parameter keeps its state across steps regardless of the order in which
// parameter lists are assembled.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Updates every parameter in the list from its gradient, then zeroes the
  // gradients.
  void step_params(const std::vector<NamedParam>& params);

  // Convenience for a lone graph: rejects stepping without a completed
  // backward, and invalidates the graph's cached forward afterwards.
  void step(Graph& graph);

  const OptimizerConfig& config() const { return config_; }

 private:
  struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;
  };

  OptimizerConfig config_;
  std::map<std::string, AdamState> state_;
};

}  // namespace crowd
