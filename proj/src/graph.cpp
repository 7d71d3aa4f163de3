#include "crowd/graph.hpp"

#include <cmath>
#include <utility>

#include "crowd/kernels.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

Tensor as_matrix(const Tensor& x) {
  if (x.ndim() == 2) return x;
  require(x.ndim() == 1, "expected rank 1 or 2 input, got rank ", x.ndim());
  Tensor m = x;
  m.shape = {1, x.shape[0]};
  return m;
}

void check_simplex_rows(const Tensor& t, const char* what) {
  const std::size_t n = t.rows();
  const std::size_t m = t.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = t.at(i, j);
      require(std::isfinite(v) && v >= -kSimplexTol, what, " row ", i,
              " has entry ", v, " outside the simplex");
      s += v;
    }
    require(std::fabs(s - 1.0) <= kSimplexTol, what, " row ", i, " sums to ",
            s, ", not 1");
  }
}

}  // namespace

Dense::Dense(std::string name, Tensor weight, Tensor bias)
    : name_(std::move(name)),
      weight_(std::move(weight)),
      bias_(std::move(bias)) {
  require(weight_.ndim() == 2, "layer ", name_, ": weight must be rank 2");
  require(bias_.ndim() == 1 && bias_.shape[0] == weight_.cols(), "layer ",
          name_, ": bias width ", shape_str(bias_.shape),
          " does not match weight ", shape_str(weight_.shape));
  weight_grad_ = Tensor::zeros(weight_.shape);
  bias_grad_ = Tensor::zeros(bias_.shape);
}

Tensor Dense::forward(const Tensor& x, bool) {
  Tensor xm = as_matrix(x);
  require(xm.cols() == weight_.rows(), "layer ", name_, ": input width ",
          xm.cols(), " does not match expected ", weight_.rows());
  cached_input_ = xm;
  const std::size_t n = xm.rows();
  const std::size_t k = weight_.rows();
  const std::size_t m = weight_.cols();
  Tensor y = Tensor::matrix(n, m);
  kernels::matmul(xm.data.data(), weight_.data.data(), y.data.data(), n, k, m);
  kernels::add_bias_rows(y.data.data(), bias_.data.data(), n, m);
  return y;
}

Tensor Dense::backward(const Tensor& gy) {
  require(cached_input_.size() > 0, "layer ", name_,
          ": backward before forward");
  const std::size_t n = cached_input_.rows();
  const std::size_t k = weight_.rows();
  const std::size_t m = weight_.cols();
  require(gy.rows() == n && gy.cols() == m, "layer ", name_,
          ": output gradient shape ", shape_str(gy.shape), " expected [", n,
          ", ", m, "]");
  Tensor wg = Tensor::matrix(k, m);
  kernels::matmul_at(cached_input_.data.data(), gy.data.data(), wg.data.data(),
                     n, k, m);
  for (std::size_t i = 0; i < wg.size(); ++i) weight_grad_.data[i] += wg[i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) bias_grad_[j] += gy.at(i, j);
  Tensor gx = Tensor::matrix(n, k);
  kernels::matmul_bt(gy.data.data(), weight_.data.data(), gx.data.data(), n, m,
                     k);
  return gx;
}

std::vector<NamedParam> Dense::params() {
  return {{name_ + ".W", &weight_, &weight_grad_},
          {name_ + ".b", &bias_, &bias_grad_}};
}

std::unique_ptr<Layer> Dense::clone() const {
  auto copy = std::make_unique<Dense>(name_, weight_, bias_);
  copy->weight_grad_ = weight_grad_;
  copy->bias_grad_ = bias_grad_;
  copy->cached_input_ = cached_input_;
  return copy;
}

Tensor Relu::forward(const Tensor& x, bool) {
  cached_input_ = as_matrix(x);
  Tensor y = Tensor::zeros(cached_input_.shape);
  kernels::relu(cached_input_.data.data(), y.data.data(),
                cached_input_.size());
  return y;
}

Tensor Relu::backward(const Tensor& gy) {
  require(cached_input_.size() > 0, "layer ", name_,
          ": backward before forward");
  require(gy.same_shape(cached_input_), "layer ", name_,
          ": output gradient shape ", shape_str(gy.shape), " expected ",
          shape_str(cached_input_.shape));
  Tensor gx = Tensor::zeros(cached_input_.shape);
  kernels::relu_grad(cached_input_.data.data(), gy.data.data(), gx.data.data(),
                     cached_input_.size());
  return gx;
}

std::unique_ptr<Layer> Relu::clone() const {
  auto copy = std::make_unique<Relu>(name_);
  copy->cached_input_ = cached_input_;
  return copy;
}

Dropout::Dropout(std::string name, double rate, std::uint64_t seed)
    : name_(std::move(name)), rate_(rate), rng_(seed) {
  require(rate_ >= 0.0 && rate_ < 1.0, "layer ", name_, ": dropout rate ",
          rate_, " must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, bool train) {
  Tensor xm = as_matrix(x);
  last_train_ = train;
  if (!train) {
    cached_scale_ = Tensor();
    return xm;
  }
  const double keep = 1.0 - rate_;
  cached_scale_ = Tensor::zeros(xm.shape);
  Tensor y = Tensor::zeros(xm.shape);
  for (std::size_t i = 0; i < xm.size(); ++i) {
    if (rng_.bernoulli(keep)) {
      cached_scale_[i] = 1.0 / keep;
      y[i] = xm[i] * cached_scale_[i];
    }
  }
  return y;
}

Tensor Dropout::backward(const Tensor& gy) {
  if (!last_train_) return gy;
  require(gy.same_shape(cached_scale_), "layer ", name_,
          ": output gradient shape ", shape_str(gy.shape), " expected ",
          shape_str(cached_scale_.shape));
  Tensor gx = Tensor::zeros(gy.shape);
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * cached_scale_[i];
  return gx;
}

std::unique_ptr<Layer> Dropout::clone() const {
  auto copy = std::make_unique<Dropout>(name_, rate_, 0);
  copy->rng_ = rng_;
  copy->cached_scale_ = cached_scale_;
  copy->last_train_ = last_train_;
  return copy;
}

void Dropout::reseed(std::uint64_t seed) { rng_ = Rng(seed); }

Tensor Softmax::forward(const Tensor& x, bool) {
  Tensor xm = as_matrix(x);
  cached_output_ = Tensor::zeros(xm.shape);
  kernels::softmax_rows(xm.data.data(), cached_output_.data.data(), xm.rows(),
                        xm.cols());
  return cached_output_;
}

Tensor Softmax::backward(const Tensor& gy) {
  require(cached_output_.size() > 0, "layer ", name_,
          ": backward before forward");
  require(gy.same_shape(cached_output_), "layer ", name_,
          ": output gradient shape ", shape_str(gy.shape), " expected ",
          shape_str(cached_output_.shape));
  const std::size_t n = cached_output_.rows();
  const std::size_t m = cached_output_.cols();
  Tensor gx = Tensor::zeros(cached_output_.shape);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      dot += gy.at(i, j) * cached_output_.at(i, j);
    for (std::size_t j = 0; j < m; ++j)
      gx.at(i, j) = cached_output_.at(i, j) * (gy.at(i, j) - dot);
  }
  return gx;
}

std::unique_ptr<Layer> Softmax::clone() const {
  auto copy = std::make_unique<Softmax>(name_);
  copy->cached_output_ = cached_output_;
  return copy;
}

Graph& Graph::operator=(const Graph& other) {
  if (this != &other) *this = other.clone();
  return *this;
}

void Graph::add(std::unique_ptr<Layer> layer) {
  require(layer != nullptr, "Graph::add: null layer");
  layers_.push_back(std::move(layer));
}

Tensor Graph::forward(const Tensor& x, bool train) {
  require(!layers_.empty(), "Graph::forward: empty graph");
  Tensor cur = as_matrix(x);
  require(input_dim_ == 0 || cur.cols() == input_dim_,
          "Graph::forward: input width ", cur.cols(), " expected ",
          input_dim_);
  for (auto& layer : layers_) {
    cur = layer->forward(cur, train);
    require(cur.all_finite(), "layer ", layer->name(),
            ": non-finite forward output");
  }
  forward_current_ = true;
  last_output_rows_ = cur.rows();
  last_output_cols_ = cur.cols();
  return cur;
}

Tensor Graph::backward(const Tensor& loss_grad) {
  require(forward_current_,
          "Graph::backward: no forward since the last parameter update");
  Tensor gm = as_matrix(loss_grad);
  require(gm.rows() == last_output_rows_ && gm.cols() == last_output_cols_,
          "Graph::backward: loss gradient shape ", shape_str(gm.shape),
          " expected [", last_output_rows_, ", ", last_output_cols_, "]");
  Tensor cur = gm;
  for (std::size_t i = layers_.size(); i > 0; --i)
    cur = layers_[i - 1]->backward(cur);
  grads_ready_ = true;
  return cur;
}

std::vector<NamedParam> Graph::params() {
  std::vector<NamedParam> out;
  for (auto& layer : layers_)
    for (auto& p : layer->params()) out.push_back(p);
  return out;
}

void Graph::zero_grad() {
  for (auto& p : params()) p.grad->fill(0.0);
  grads_ready_ = false;
}

void Graph::mark_params_updated() {
  forward_current_ = false;
  grads_ready_ = false;
}

void Graph::reseed_dropout(std::uint64_t seed) {
  std::uint64_t i = 0;
  for (auto& layer : layers_) {
    if (auto* d = dynamic_cast<Dropout*>(layer.get())) {
      d->reseed(mix64(seed, i));
      ++i;
    }
  }
}

Graph Graph::clone() const {
  Graph copy(input_dim_);
  for (const auto& layer : layers_) copy.layers_.push_back(layer->clone());
  copy.forward_current_ = forward_current_;
  copy.grads_ready_ = grads_ready_;
  copy.last_output_rows_ = last_output_rows_;
  copy.last_output_cols_ = last_output_cols_;
  return copy;
}

Graph build_mlp(const NetworkSpec& spec, std::uint64_t seed) {
  require(spec.input_dim > 0, "build_mlp: input_dim must be positive");
  require(spec.output_dim > 0, "build_mlp: output_dim must be positive");
  Rng rng(seed);
  Graph g(spec.input_dim);
  std::size_t in = spec.input_dim;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const std::size_t out = spec.hidden[i];
    require(out > 0, "build_mlp: hidden width must be positive");
    Tensor w = Tensor::matrix(in, out);
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.normal(0.0, sd);
    g.add(std::make_unique<Dense>("dense" + std::to_string(i), std::move(w),
                                  Tensor::zeros({out})));
    g.add(std::make_unique<Relu>("relu" + std::to_string(i)));
    in = out;
  }
  if (spec.dropout > 0.0)
    g.add(std::make_unique<Dropout>("dropout", spec.dropout, rng.next_u64()));
  Tensor w = Tensor::matrix(in, spec.output_dim);
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.normal(0.0, sd);
  g.add(std::make_unique<Dense>("out", std::move(w),
                                Tensor::zeros({spec.output_dim})));
  if (spec.softmax_output) g.add(std::make_unique<Softmax>("softmax"));
  return g;
}

double cross_entropy_soft(const Tensor& predicted, const Tensor& target) {
  Tensor p = as_matrix(predicted);
  Tensor t = as_matrix(target);
  require(p.same_shape(t), "cross_entropy_soft: predicted shape ",
          shape_str(p.shape), " target shape ", shape_str(t.shape));
  check_simplex_rows(p, "cross_entropy_soft: predicted");
  check_simplex_rows(t, "cross_entropy_soft: target");
  const std::size_t n = p.rows();
  const std::size_t m = p.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      total -= t.at(i, j) * std::log(p.at(i, j) + kLogFloor);
  return total / static_cast<double>(n);
}

Tensor cross_entropy_soft_grad(const Tensor& predicted, const Tensor& target) {
  Tensor p = as_matrix(predicted);
  Tensor t = as_matrix(target);
  require(p.same_shape(t), "cross_entropy_soft_grad: predicted shape ",
          shape_str(p.shape), " target shape ", shape_str(t.shape));
  const std::size_t n = p.rows();
  Tensor g = Tensor::zeros(p.shape);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = -t[i] / (p[i] + kLogFloor) / static_cast<double>(n);
  return g;
}

double mse(const Tensor& predicted, const Tensor& target) {
  require(predicted.same_shape(target), "mse: predicted shape ",
          shape_str(predicted.shape), " target shape ",
          shape_str(target.shape));
  require(predicted.size() > 0, "mse: empty tensors");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    total += d * d;
  }
  return total / static_cast<double>(predicted.size());
}

Tensor mse_grad(const Tensor& predicted, const Tensor& target) {
  require(predicted.same_shape(target), "mse_grad: predicted shape ",
          shape_str(predicted.shape), " target shape ",
          shape_str(target.shape));
  Tensor g = Tensor::zeros(predicted.shape);
  for (std::size_t i = 0; i < predicted.size(); ++i)
    g[i] = 2.0 * (predicted[i] - target[i]) /
           static_cast<double>(predicted.size());
  return g;
}

}  // namespace crowd
