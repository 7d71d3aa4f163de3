#include "crowd/crowd_layer.hpp"

#include <cmath>

#include "crowd/kernels.hpp"
#include "crowd/serialize.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

struct Role {
  const char* prefix;
};

// Role layout per variant; slot = annotator * roles + role index.
std::vector<Role> variant_roles(CrowdVariant v) {
  switch (v) {
    case CrowdVariant::mw: return {{"crowd.W"}};
    case CrowdVariant::vw: return {{"crowd.w"}};
    case CrowdVariant::vwb: return {{"crowd.w"}, {"crowd.bv"}};
    case CrowdVariant::s: return {{"crowd.s"}};
    case CrowdVariant::b: return {{"crowd.b"}};
    case CrowdVariant::sb: return {{"crowd.s"}, {"crowd.b"}};
  }
  fail("unreachable crowd variant");
}

Tensor identity_value(CrowdVariant v, std::size_t role, std::size_t c) {
  switch (v) {
    case CrowdVariant::mw: return Tensor::identity(c);
    case CrowdVariant::vw: return Tensor::full({c}, 1.0);
    case CrowdVariant::vwb:
      return role == 0 ? Tensor::full({c}, 1.0) : Tensor::zeros({c});
    case CrowdVariant::s: return Tensor::full({1}, 1.0);
    case CrowdVariant::b: return Tensor::zeros({1});
    case CrowdVariant::sb:
      return role == 0 ? Tensor::full({1}, 1.0) : Tensor::zeros({1});
  }
  fail("unreachable crowd variant");
}

void check_bottleneck(const CrowdParams& params, const Tensor& bottleneck) {
  require(bottleneck.ndim() == 2, "crowd layer: bottleneck must be rank 2, "
          "got ", shape_str(bottleneck.shape));
  if (is_classification_variant(params.variant())) {
    require(bottleneck.cols() == params.num_classes(),
            "crowd layer: bottleneck width ", bottleneck.cols(),
            " does not match ", params.num_classes(), " classes");
  } else {
    require(bottleneck.cols() == 1,
            "crowd layer: regression bottleneck must have one column, got ",
            bottleneck.cols());
  }
  require(bottleneck.all_finite(), "crowd layer: non-finite bottleneck");
}

void check_labels(const CrowdParams& params, const Tensor& bottleneck,
                  const AnnotationTable& labels) {
  require(labels.num_items() == bottleneck.rows(), "crowd layer: ",
          labels.num_items(), " annotation rows vs ", bottleneck.rows(),
          " bottleneck rows");
  require(labels.num_annotators() == params.num_annotators(), "crowd layer: ",
          labels.num_annotators(), " annotator columns vs ",
          params.num_annotators(), " annotator mappings");
  if (is_classification_variant(params.variant())) {
    require(labels.is_classification(),
            "crowd layer: classification variant on a regression table");
    require(labels.num_classes() == params.num_classes(), "crowd layer: ",
            labels.num_classes(), " label classes vs ", params.num_classes(),
            " mapping classes");
  } else {
    require(!labels.is_classification(),
            "crowd layer: regression variant on a classification table");
  }
}

}  // namespace

CrowdVariant crowd_variant_from_string(const std::string& s) {
  if (s == "mw") return CrowdVariant::mw;
  if (s == "vw") return CrowdVariant::vw;
  if (s == "vw+b") return CrowdVariant::vwb;
  if (s == "s") return CrowdVariant::s;
  if (s == "b") return CrowdVariant::b;
  if (s == "s+b") return CrowdVariant::sb;
  fail("unknown crowd variant '", s,
       "' (expected mw, vw, vw+b, s, b, or s+b)");
}

std::string to_string(CrowdVariant v) {
  switch (v) {
    case CrowdVariant::mw: return "mw";
    case CrowdVariant::vw: return "vw";
    case CrowdVariant::vwb: return "vw+b";
    case CrowdVariant::s: return "s";
    case CrowdVariant::b: return "b";
    case CrowdVariant::sb: return "s+b";
  }
  fail("unreachable crowd variant");
}

bool is_classification_variant(CrowdVariant v) {
  return v == CrowdVariant::mw || v == CrowdVariant::vw ||
         v == CrowdVariant::vwb;
}

CrowdParams::CrowdParams(CrowdVariant variant, std::size_t num_annotators,
                         std::size_t num_classes)
    : variant_(variant),
      num_annotators_(num_annotators),
      num_classes_(is_classification_variant(variant) ? num_classes : 0) {
  require(num_annotators_ > 0, "crowd params: need at least one annotator");
  if (is_classification_variant(variant_))
    require(num_classes_ >= 2, "crowd params: classification variants need "
            "at least 2 classes");
  const auto roles = variant_roles(variant_);
  for (std::size_t r = 0; r < num_annotators_; ++r) {
    for (std::size_t role = 0; role < roles.size(); ++role) {
      Tensor v = identity_value(variant_, role, num_classes_);
      grads_.push_back(Tensor::zeros(v.shape));
      values_.push_back(std::move(v));
      names_.push_back(msg(roles[role].prefix, r));
    }
  }
}

std::size_t CrowdParams::roles() const {
  return variant_roles(variant_).size();
}

std::size_t CrowdParams::slot(std::size_t r, std::size_t role) const {
  require(r < num_annotators_, "crowd params: annotator ", r, " out of ",
          num_annotators_);
  return r * roles() + role;
}

const Tensor& CrowdParams::matrix(std::size_t r) const {
  require(variant_ == CrowdVariant::mw,
          "crowd params: matrix() requires the mw variant");
  return values_[slot(r, 0)];
}

const Tensor& CrowdParams::weight_vector(std::size_t r) const {
  require(variant_ == CrowdVariant::vw || variant_ == CrowdVariant::vwb,
          "crowd params: weight_vector() requires vw or vw+b");
  return values_[slot(r, 0)];
}

const Tensor& CrowdParams::bias_vector(std::size_t r) const {
  require(variant_ == CrowdVariant::vwb,
          "crowd params: bias_vector() requires vw+b");
  return values_[slot(r, 1)];
}

double CrowdParams::scale(std::size_t r) const {
  require(variant_ == CrowdVariant::s || variant_ == CrowdVariant::sb,
          "crowd params: scale() requires s or s+b");
  return values_[slot(r, 0)][0];
}

double CrowdParams::bias(std::size_t r) const {
  require(variant_ == CrowdVariant::b || variant_ == CrowdVariant::sb,
          "crowd params: bias() requires b or s+b");
  return values_[slot(r, variant_ == CrowdVariant::sb ? 1 : 0)][0];
}

std::vector<NamedParam> CrowdParams::params() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < values_.size(); ++i)
    out.push_back({names_[i], &values_[i], &grads_[i]});
  return out;
}

void CrowdParams::zero_grad() {
  for (Tensor& g : grads_) g.fill(0.0);
}

double CrowdParams::add_identity_pull(double l2) {
  require(l2 >= 0.0, "crowd params: negative identity pull");
  if (l2 == 0.0) return 0.0;
  double penalty = 0.0;
  const std::size_t nroles = roles();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const Tensor id = identity_value(variant_, i % nroles, num_classes_);
    for (std::size_t j = 0; j < values_[i].size(); ++j) {
      const double d = values_[i][j] - id[j];
      grads_[i][j] += l2 * d;
      penalty += 0.5 * l2 * d * d;
    }
  }
  return penalty;
}

nlohmann::json CrowdParams::to_json() const {
  nlohmann::json j;
  j["variant"] = to_string(variant_);
  j["num_annotators"] = num_annotators_;
  j["num_classes"] = num_classes_;
  nlohmann::json p = nlohmann::json::object();
  for (std::size_t i = 0; i < values_.size(); ++i)
    p[names_[i]] = tensor_to_json(values_[i]);
  j["params"] = p;
  return j;
}

CrowdParams CrowdParams::from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("variant") &&
              j.contains("num_annotators") && j.contains("params"),
          "crowd params: malformed JSON");
  const CrowdVariant v =
      crowd_variant_from_string(j.at("variant").get<std::string>());
  const std::size_t r = j.at("num_annotators").get<std::size_t>();
  const std::size_t c = is_classification_variant(v)
                            ? j.at("num_classes").get<std::size_t>()
                            : 0;
  CrowdParams out(v, r, is_classification_variant(v) ? c : 2);
  checkpoint_from_json(j.at("params"), out.params());
  return out;
}

Tensor crowd_forward_one(const CrowdParams& params, const Tensor& bottleneck,
                         std::size_t annotator) {
  check_bottleneck(params, bottleneck);
  require(annotator < params.num_annotators(), "crowd layer: annotator ",
          annotator, " out of ", params.num_annotators());
  const std::size_t n = bottleneck.rows();
  switch (params.variant()) {
    case CrowdVariant::mw: {
      const Tensor& w = params.matrix(annotator);
      const std::size_t c = params.num_classes();
      Tensor a = Tensor::matrix(n, c);
      kernels::matmul_bt(bottleneck.data.data(), w.data.data(), a.data.data(),
                         n, c, c);
      Tensor o = Tensor::zeros(a.shape);
      kernels::softmax_rows(a.data.data(), o.data.data(), n, c);
      return o;
    }
    case CrowdVariant::vw:
    case CrowdVariant::vwb: {
      const Tensor& w = params.weight_vector(annotator);
      const std::size_t c = params.num_classes();
      Tensor a = Tensor::matrix(n, c);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k)
          a.at(i, k) = w[k] * bottleneck.at(i, k);
      if (params.variant() == CrowdVariant::vwb) {
        const Tensor& b = params.bias_vector(annotator);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < c; ++k) a.at(i, k) += b[k];
      }
      Tensor o = Tensor::zeros(a.shape);
      kernels::softmax_rows(a.data.data(), o.data.data(), n, c);
      return o;
    }
    case CrowdVariant::s: {
      Tensor o = Tensor::matrix(n, 1);
      for (std::size_t i = 0; i < n; ++i)
        o.at(i, 0) = params.scale(annotator) * bottleneck.at(i, 0);
      return o;
    }
    case CrowdVariant::b: {
      Tensor o = Tensor::matrix(n, 1);
      for (std::size_t i = 0; i < n; ++i)
        o.at(i, 0) = bottleneck.at(i, 0) + params.bias(annotator);
      return o;
    }
    case CrowdVariant::sb: {
      Tensor o = Tensor::matrix(n, 1);
      for (std::size_t i = 0; i < n; ++i)
        o.at(i, 0) = params.scale(annotator) * bottleneck.at(i, 0) +
                     params.bias(annotator);
      return o;
    }
  }
  fail("unreachable crowd variant");
}

double crowd_loss(const CrowdParams& params, const Tensor& bottleneck,
                  const AnnotationTable& labels) {
  check_bottleneck(params, bottleneck);
  check_labels(params, bottleneck, labels);
  const std::size_t pairs = labels.total_answers();
  require(pairs > 0, "crowd_loss: batch has no observed labels");
  double total = 0.0;
  for (std::size_t r = 0; r < params.num_annotators(); ++r) {
    if (labels.answers_for_annotator(r) == 0) continue;
    const Tensor o = crowd_forward_one(params, bottleneck, r);
    for (std::size_t i = 0; i < labels.num_items(); ++i) {
      if (!labels.present(i, r)) continue;
      if (is_classification_variant(params.variant())) {
        const auto y = static_cast<std::size_t>(labels.label(i, r));
        total -= std::log(o.at(i, y) + kLogFloor);
      } else {
        const double e = o.at(i, 0) - labels.value(i, r);
        total += e * e;
      }
    }
  }
  return total / static_cast<double>(pairs);
}

Tensor crowd_backward(CrowdParams& params, const Tensor& bottleneck,
                      const AnnotationTable& labels, double* loss_out) {
  check_bottleneck(params, bottleneck);
  check_labels(params, bottleneck, labels);
  const std::size_t pairs = labels.total_answers();
  require(pairs > 0, "crowd_backward: batch has no observed labels");
  const double inv_pairs = 1.0 / static_cast<double>(pairs);
  const std::size_t n = bottleneck.rows();
  const std::size_t c = params.num_classes();
  Tensor dBottleneck = Tensor::zeros(bottleneck.shape);
  double total = 0.0;

  for (std::size_t r = 0; r < params.num_annotators(); ++r) {
    if (labels.answers_for_annotator(r) == 0) continue;
    const Tensor o = crowd_forward_one(params, bottleneck, r);
    switch (params.variant()) {
      case CrowdVariant::mw: {
        const Tensor& w = params.values_[params.slot(r, 0)];
        Tensor& wg = params.grads_[params.slot(r, 0)];
        for (std::size_t i = 0; i < n; ++i) {
          if (!labels.present(i, r)) continue;
          const auto y = static_cast<std::size_t>(labels.label(i, r));
          const double oy = o.at(i, y);
          total -= std::log(oy + kLogFloor);
          const double scale = oy / (oy + kLogFloor) * inv_pairs;
          for (std::size_t l = 0; l < c; ++l) {
            // dLoss/da_l with a = W sigma
            const double da = scale * (o.at(i, l) - (l == y ? 1.0 : 0.0));
            for (std::size_t k = 0; k < c; ++k) {
              wg.at(l, k) += da * bottleneck.at(i, k);
              dBottleneck.at(i, k) += w.at(l, k) * da;
            }
          }
        }
        break;
      }
      case CrowdVariant::vw:
      case CrowdVariant::vwb: {
        const Tensor& w = params.values_[params.slot(r, 0)];
        Tensor& wg = params.grads_[params.slot(r, 0)];
        Tensor* bg = params.variant() == CrowdVariant::vwb
                         ? &params.grads_[params.slot(r, 1)]
                         : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
          if (!labels.present(i, r)) continue;
          const auto y = static_cast<std::size_t>(labels.label(i, r));
          const double oy = o.at(i, y);
          total -= std::log(oy + kLogFloor);
          const double scale = oy / (oy + kLogFloor) * inv_pairs;
          for (std::size_t k = 0; k < c; ++k) {
            const double da = scale * (o.at(i, k) - (k == y ? 1.0 : 0.0));
            wg[k] += da * bottleneck.at(i, k);
            dBottleneck.at(i, k) += w[k] * da;
            if (bg != nullptr) (*bg)[k] += da;
          }
        }
        break;
      }
      case CrowdVariant::s:
      case CrowdVariant::b:
      case CrowdVariant::sb: {
        const bool has_scale = params.variant() != CrowdVariant::b;
        const bool has_bias = params.variant() != CrowdVariant::s;
        Tensor* sg = has_scale ? &params.grads_[params.slot(r, 0)] : nullptr;
        Tensor* bg = has_bias
                         ? &params.grads_[params.slot(r, has_scale ? 1 : 0)]
                         : nullptr;
        const double s = has_scale ? params.scale(r) : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!labels.present(i, r)) continue;
          const double e = o.at(i, 0) - labels.value(i, r);
          total += e * e;
          const double g = 2.0 * e * inv_pairs;
          if (sg != nullptr) (*sg)[0] += g * bottleneck.at(i, 0);
          if (bg != nullptr) (*bg)[0] += g;
          dBottleneck.at(i, 0) += g * s;
        }
        break;
      }
    }
  }
  if (loss_out != nullptr) *loss_out = total * inv_pairs;
  return dBottleneck;
}

Graph strip(const Graph& trained_network) { return trained_network.clone(); }

CrowdTrainResult train_crowd(const NetworkSpec& net_spec,
                             const Dataset& train, CrowdVariant variant,
                             const TrainOptions& opts, const Dataset* eval_set,
                             double crowd_learning_rate, double identity_l2) {
  const bool classify = is_classification_variant(variant);
  require(classify == (train.kind != TaskKind::regression),
          "train_crowd: variant ", to_string(variant),
          " does not fit a ", to_string(train.kind), " task");
  if (classify) {
    require(net_spec.softmax_output,
            "train_crowd: classification needs a softmax bottleneck");
    require(net_spec.output_dim == train.answers.num_classes(),
            "train_crowd: network outputs ", net_spec.output_dim,
            " classes but the answers have ", train.answers.num_classes());
  } else {
    require(!net_spec.softmax_output && net_spec.output_dim == 1,
            "train_crowd: regression needs a linear one-unit bottleneck");
  }
  train.answers.validate("train_crowd");
  require(train.features.rows() == train.answers.num_items(),
          "train_crowd: ", train.features.rows(), " feature rows vs ",
          train.answers.num_items(), " annotation rows");

  CrowdTrainResult res;
  res.network = build_network(net_spec, opts.seed);
  res.params = CrowdParams(variant, train.answers.num_annotators(),
                           classify ? train.answers.num_classes() : 2);

  Optimizer opt_net(opts.optimizer);
  OptimizerConfig crowd_cfg = opts.optimizer;
  if (crowd_learning_rate > 0.0) crowd_cfg.learning_rate = crowd_learning_rate;
  Optimizer opt_crowd(crowd_cfg);

  const std::size_t n = train.features.rows();
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto batches = epoch_batches(n, opts.batch_size, opts.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Tensor xb = take_rows(train.features, batches[b]);
      const AnnotationTable yb = train.answers.rows(batches[b]);
      res.network.reseed_dropout(batch_seed(opts.seed, epoch, b));
      res.network.zero_grad();
      res.params.zero_grad();
      const Tensor sigma = res.network.forward(xb, true);
      double loss = 0.0;
      const Tensor dSigma = crowd_backward(res.params, sigma, yb, &loss);
      if (identity_l2 > 0.0) loss += res.params.add_identity_pull(identity_l2);
      require(std::isfinite(loss), "train_crowd: diverged at epoch ", epoch,
              ", batch ", b, ": non-finite loss");
      res.network.backward(dSigma);
      opt_net.step(res.network);
      opt_crowd.step_params(res.params.params());
      epoch_loss += loss * static_cast<double>(batches[b].size());
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(n);
    if (eval_set != nullptr) {
      entry.has_metric = true;
      entry.metric = eval_metric(res.network, *eval_set);
    }
    res.log.push_back(entry);
  }
  return res;
}

}  // namespace crowd
