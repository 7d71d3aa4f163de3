#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "crowd/rng.hpp"
#include "crowd/tensor.hpp"

namespace crowd {

// Natural log arguments are floored by adding this to probabilities.
inline constexpr double kLogFloor = 1e-12;
// Simplex membership tolerance for loss inputs.
inline constexpr double kSimplexTol = 1e-8;

struct NamedParam {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual const std::string& name() const = 0;
  // Forward caches whatever backward needs. train toggles dropout.
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  // Takes dLoss/dOutput, accumulates parameter gradients, returns
  // dLoss/dInput.
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual std::vector<NamedParam> params() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(std::string name, Tensor weight, Tensor bias);
  const std::string& name() const override { return name_; }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::vector<NamedParam> params() override;
  std::unique_ptr<Layer> clone() const override;
  std::size_t in_dim() const { return weight_.rows(); }
  std::size_t out_dim() const { return weight_.cols(); }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::string name_;
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out]
  Tensor weight_grad_;
  Tensor bias_grad_;
  Tensor cached_input_;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  std::string name_;
  Tensor cached_input_;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) at train time so
// evaluation is a plain pass-through. Masks come from an internal stream that
// the trainer reseeds once per batch.
class Dropout final : public Layer {
 public:
  Dropout(std::string name, double rate, std::uint64_t seed);
  const std::string& name() const override { return name_; }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::unique_ptr<Layer> clone() const override;
  void reseed(std::uint64_t seed);
  double rate() const { return rate_; }

 private:
  std::string name_;
  double rate_;
  Rng rng_;
  Tensor cached_scale_;  // 0 or 1/(1-rate) per unit, train forward only
  bool last_train_ = false;
};

class Softmax final : public Layer {
 public:
  explicit Softmax(std::string name) : name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  std::string name_;
  Tensor cached_output_;
};

// A fixed stack of layers trained end to end. Backward requires a forward
// since the last parameter update; the optimizer flags updates via
// mark_params_updated.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t input_dim) : input_dim_(input_dim) {}
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;
  Graph(const Graph& other) { *this = other.clone(); }
  Graph& operator=(const Graph& other);

  void add(std::unique_ptr<Layer> layer);
  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_layers() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  // x is [n, input_dim]; rank-1 input is treated as one row.
  Tensor forward(const Tensor& x, bool train = false);
  // loss_grad matches the last forward output; returns dLoss/dInput.
  Tensor backward(const Tensor& loss_grad);

  std::vector<NamedParam> params();
  void zero_grad();
  bool grads_ready() const { return grads_ready_; }
  void mark_params_updated();
  void reseed_dropout(std::uint64_t seed);
  Graph clone() const;

 private:
  std::size_t input_dim_ = 0;
  std::vector<std::unique_ptr<Layer>> layers_;
  bool forward_current_ = false;  // a forward ran since the last update
  bool grads_ready_ = false;
  std::size_t last_output_rows_ = 0;
  std::size_t last_output_cols_ = 0;
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // widths of dense+ReLU blocks
  std::size_t output_dim = 0;
  double dropout = 0.0;       // applied between last hidden and output
  bool softmax_output = true; // false gives a linear head
};

// He-initialized MLP; layer names are dense0, relu0, ..., dropout, out,
// softmax. All randomness comes from seed.
Graph build_mlp(const NetworkSpec& spec, std::uint64_t seed);

// Mean over rows of -sum_c target[c] * log(predicted[c] + kLogFloor).
// Every row of both tensors must lie on the probability simplex within
// kSimplexTol.
double cross_entropy_soft(const Tensor& predicted, const Tensor& target);
Tensor cross_entropy_soft_grad(const Tensor& predicted, const Tensor& target);

// Mean of elementwise squared differences.
double mse(const Tensor& predicted, const Tensor& target);
Tensor mse_grad(const Tensor& predicted, const Tensor& target);

}  // namespace crowd
