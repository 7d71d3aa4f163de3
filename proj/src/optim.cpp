#include "crowd/optim.hpp"

#include <cmath>

#include "crowd/util.hpp"

namespace crowd {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  fail("unknown optimizer '", s, "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  require(config_.learning_rate > 0.0, "optimizer: learning rate ",
          config_.learning_rate, " must be positive");
  require(config_.beta1 >= 0.0 && config_.beta1 < 1.0,
          "optimizer: beta1 must lie in [0, 1)");
  require(config_.beta2 >= 0.0 && config_.beta2 < 1.0,
          "optimizer: beta2 must lie in [0, 1)");
  require(config_.eps > 0.0, "optimizer: eps must be positive");
}

void Optimizer::step_params(const std::vector<NamedParam>& params) {
  for (const auto& p : params) {
    require(p.value != nullptr && p.grad != nullptr, "optimizer: parameter '",
            p.name, "' has no storage");
    require(p.grad->same_shape(*p.value), "optimizer: parameter '", p.name,
            "' gradient shape ", shape_str(p.grad->shape),
            " does not match value shape ", shape_str(p.value->shape));
    require(p.grad->all_finite(), "optimizer: parameter '", p.name,
            "' has a non-finite gradient");
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < p.value->size(); ++i)
        (*p.value)[i] -= config_.learning_rate * (*p.grad)[i];
    } else {
      AdamState& st = state_[p.name];
      if (st.t == 0) {
        st.m = Tensor::zeros(p.value->shape);
        st.v = Tensor::zeros(p.value->shape);
      }
      require(st.m.same_shape(*p.value), "optimizer: parameter '", p.name,
              "' changed shape mid-run");
      st.t += 1;
      const double c1 = 1.0 - std::pow(config_.beta1, double(st.t));
      const double c2 = 1.0 - std::pow(config_.beta2, double(st.t));
      for (std::size_t i = 0; i < p.value->size(); ++i) {
        const double g = (*p.grad)[i];
        st.m[i] = config_.beta1 * st.m[i] + (1.0 - config_.beta1) * g;
        st.v[i] = config_.beta2 * st.v[i] + (1.0 - config_.beta2) * g * g;
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        (*p.value)[i] -=
            config_.learning_rate * mhat / (std::sqrt(vhat) + config_.eps);
      }
    }
    p.grad->fill(0.0);
  }
}

void Optimizer::step(Graph& graph) {
  require(graph.grads_ready(),
          "optimizer: step without populated gradients (run backward first)");
  step_params(graph.params());
  graph.mark_params_updated();
}

}  // namespace crowd
