#include "crowd/em_crowd.hpp"

#include <cmath>

#include "crowd/aggregation.hpp"
#include "crowd/serialize.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

constexpr double kTinyNormalizer = 1e-300;

double safe_log(double x) { return std::log(x < kTinyNormalizer ? kTinyNormalizer : x); }

void check_confusions(const std::vector<Tensor>& confusions,
                      std::size_t num_annotators, std::size_t num_classes,
                      const char* what) {
  require(confusions.size() == num_annotators, what, ": ", confusions.size(),
          " confusion matrices vs ", num_annotators, " annotators");
  for (std::size_t r = 0; r < confusions.size(); ++r) {
    const Tensor& pi = confusions[r];
    require(pi.ndim() == 2 && pi.rows() == num_classes &&
                pi.cols() == num_classes,
            what, ": confusion ", r, " has shape ", shape_str(pi.shape),
            " for ", num_classes, " classes");
    for (std::size_t c = 0; c < num_classes; ++c) {
      double row = 0.0;
      for (std::size_t l = 0; l < num_classes; ++l) {
        require(pi.at(c, l) >= 0.0, what, ": confusion ", r,
                " has a negative cell");
        row += pi.at(c, l);
      }
      require(std::abs(row - 1.0) <= kSimplexTol, what, ": confusion ", r,
              " row ", c, " sums to ", row);
    }
  }
}

void check_class_probs(const Tensor& class_probs,
                       const AnnotationTable& labels, const char* what) {
  require(class_probs.ndim() == 2, what, ": class probabilities must be "
          "rank 2, got ", shape_str(class_probs.shape));
  require(class_probs.rows() == labels.num_items(), what, ": ",
          class_probs.rows(), " probability rows vs ", labels.num_items(),
          " annotated items");
  require(labels.is_classification(), what, ": regression table");
  require(class_probs.cols() == labels.num_classes(), what, ": ",
          class_probs.cols(), " probability columns vs ",
          labels.num_classes(), " classes");
  for (std::size_t i = 0; i < class_probs.rows(); ++i) {
    double row = 0.0;
    for (std::size_t c = 0; c < class_probs.cols(); ++c) {
      require(class_probs.at(i, c) >= 0.0, what,
              ": negative class probability at row ", i);
      row += class_probs.at(i, c);
    }
    require(std::abs(row - 1.0) <= kSimplexTol, what, ": probability row ", i,
            " sums to ", row);
  }
}

}  // namespace

nlohmann::json EmState::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["em_schedule"] = em_schedule;
  if (posteriors.size() > 0) j["posteriors"] = tensor_to_json(posteriors);
  if (!confusions.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Tensor& pi : confusions) arr.push_back(tensor_to_json(pi));
    j["confusions"] = arr;
  }
  if (!precisions.empty()) j["precisions"] = precisions;
  if (!targets.empty()) j["targets"] = targets;
  return j;
}

EmState EmState::from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("epoch") && j.contains("em_schedule"),
          "EM state: malformed JSON");
  EmState s;
  s.epoch = j.at("epoch").get<std::size_t>();
  s.em_schedule = j.at("em_schedule").get<std::size_t>();
  if (j.contains("posteriors"))
    s.posteriors = tensor_from_json(j.at("posteriors"), "EM posteriors");
  if (j.contains("confusions")) {
    for (const auto& e : j.at("confusions"))
      s.confusions.push_back(tensor_from_json(e, "EM confusion"));
  }
  if (j.contains("precisions"))
    s.precisions = j.at("precisions").get<std::vector<double>>();
  if (j.contains("targets"))
    s.targets = j.at("targets").get<std::vector<double>>();
  for (double p : s.precisions)
    require(p > 0.0, "EM state: non-positive precision");
  return s;
}

Tensor e_step_classification(const Tensor& class_probs,
                             const AnnotationTable& labels,
                             const std::vector<Tensor>& confusions,
                             EmStepStats* stats) {
  check_class_probs(class_probs, labels, "e_step");
  const std::size_t n = labels.num_items();
  const std::size_t c = labels.num_classes();
  check_confusions(confusions, labels.num_annotators(), c, "e_step");
  Tensor q = Tensor::matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      double v = class_probs.at(i, k);
      for (std::size_t r = 0; r < labels.num_annotators(); ++r) {
        if (!labels.present(i, r)) continue;
        v *= confusions[r].at(k, static_cast<std::size_t>(labels.label(i, r)));
      }
      q.at(i, k) = v;
      z += v;
    }
    if (z < kTinyNormalizer) {
      z = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        q.at(i, k) += kLogFloor;
        z += q.at(i, k);
      }
      if (stats != nullptr) ++stats->floored_items;
    }
    for (std::size_t k = 0; k < c; ++k) q.at(i, k) /= z;
  }
  return q;
}

Tensor e_step_sequence(const Tensor& class_probs,
                       const AnnotationTable& labels,
                       const std::vector<std::size_t>& sentence_lengths,
                       const std::vector<Tensor>& confusions,
                       EmStepStats* stats) {
  std::size_t total = 0;
  for (std::size_t len : sentence_lengths) {
    require(len > 0, "e_step_sequence: empty sentence");
    total += len;
  }
  require(total == labels.num_items(), "e_step_sequence: sentence lengths "
          "cover ", total, " tokens but the table has ", labels.num_items());
  require(class_probs.ndim() == 2 && class_probs.rows() == total,
          "e_step_sequence: ", class_probs.rows(), " probability rows vs ",
          total, " tokens");
  Tensor q = Tensor::matrix(total, labels.num_classes());
  std::size_t start = 0;
  for (std::size_t len : sentence_lengths) {
    std::vector<std::size_t> tokens(len);
    for (std::size_t t = 0; t < len; ++t) tokens[t] = start + t;
    const Tensor qs = e_step_classification(take_rows(class_probs, tokens),
                                            labels.rows(tokens), confusions,
                                            stats);
    for (std::size_t t = 0; t < len; ++t) q.set_row(start + t, qs.row(t));
    start += len;
  }
  return q;
}

std::vector<Tensor> m_step_confusions(const Tensor& posteriors,
                                      const AnnotationTable& labels,
                                      double prior_strength) {
  check_class_probs(posteriors, labels, "m_step_confusions");
  require(prior_strength >= 0.0,
          "m_step_confusions: negative prior strength");
  const std::size_t n = labels.num_items();
  const std::size_t c = labels.num_classes();
  std::vector<Tensor> out;
  out.reserve(labels.num_annotators());
  for (std::size_t r = 0; r < labels.num_annotators(); ++r) {
    Tensor pi = Tensor::full({c, c}, prior_strength);
    for (std::size_t i = 0; i < n; ++i) {
      if (!labels.present(i, r)) continue;
      const auto l = static_cast<std::size_t>(labels.label(i, r));
      for (std::size_t k = 0; k < c; ++k)
        pi.at(k, l) += posteriors.at(i, k);
    }
    for (std::size_t k = 0; k < c; ++k) {
      double row = 0.0;
      for (std::size_t l = 0; l < c; ++l) row += pi.at(k, l);
      for (std::size_t l = 0; l < c; ++l)
        pi.at(k, l) = row > 0.0 ? pi.at(k, l) / row
                                : 1.0 / static_cast<double>(c);
    }
    out.push_back(std::move(pi));
  }
  return out;
}

double m_step_network(Graph& net, Optimizer& opt, const Tensor& features,
                      const Tensor& posteriors, std::size_t steps,
                      std::size_t batch_size, std::uint64_t seed,
                      std::size_t first_epoch) {
  double loss = 0.0;
  for (std::size_t s = 0; s < steps; ++s)
    loss = train_one_epoch_soft(net, opt, features, posteriors, batch_size,
                                seed, first_epoch + s);
  return loss;
}

double em_objective(const Tensor& class_probs, const AnnotationTable& labels,
                    const std::vector<Tensor>& confusions,
                    double prior_strength) {
  check_class_probs(class_probs, labels, "em_objective");
  const std::size_t c = labels.num_classes();
  check_confusions(confusions, labels.num_annotators(), c, "em_objective");
  double obj = 0.0;
  for (std::size_t i = 0; i < labels.num_items(); ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      double v = class_probs.at(i, k);
      for (std::size_t r = 0; r < labels.num_annotators(); ++r) {
        if (!labels.present(i, r)) continue;
        v *= confusions[r].at(k, static_cast<std::size_t>(labels.label(i, r)));
      }
      z += v;
    }
    obj += safe_log(z);
  }
  if (prior_strength > 0.0) {
    for (const Tensor& pi : confusions)
      for (std::size_t j = 0; j < pi.size(); ++j)
        obj += prior_strength * safe_log(pi[j]);
  }
  return obj;
}

RegressionEmRound regression_em_round(const AnnotationTable& labels,
                                      const std::vector<double>& predictions,
                                      const std::vector<double>& prev_targets) {
  require(!labels.is_classification(),
          "regression_em_round: classification table");
  const std::size_t n = labels.num_items();
  require(predictions.size() == n && prev_targets.size() == n,
          "regression_em_round: ", predictions.size(), " predictions and ",
          prev_targets.size(), " targets vs ", n, " items");
  RegressionEmRound round;
  round.precisions.assign(labels.num_annotators(), 1.0);
  for (std::size_t r = 0; r < labels.num_annotators(); ++r) {
    const std::size_t answers = labels.answers_for_annotator(r);
    if (answers < 2) continue;  // too few residuals to estimate a variance
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!labels.present(i, r)) continue;
      const double e = labels.value(i, r) - prev_targets[i];
      ss += e * e;
    }
    const double variance =
        std::max(ss / static_cast<double>(answers), kVarianceFloor);
    round.precisions[r] = 1.0 / variance;
  }
  round.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Unit prior precision anchors the estimate to the network prediction.
    double num = predictions[i];
    double den = 1.0;
    for (std::size_t r = 0; r < labels.num_annotators(); ++r) {
      if (!labels.present(i, r)) continue;
      num += round.precisions[r] * labels.value(i, r);
      den += round.precisions[r];
    }
    round.targets[i] = num / den;
  }
  return round;
}

EmTrainResult train_em_classification(const NetworkSpec& net_spec,
                                      const Dataset& train,
                                      std::size_t em_schedule,
                                      double prior_strength,
                                      const TrainOptions& opts,
                                      const Dataset* eval_set) {
  require(train.kind != TaskKind::regression,
          "train_em_classification: regression dataset");
  train.answers.validate("train_em_classification");
  require(train.features.rows() == train.answers.num_items(),
          "train_em_classification: ", train.features.rows(),
          " feature rows vs ", train.answers.num_items(), " annotation rows");
  require(net_spec.softmax_output,
          "train_em_classification: needs a softmax network");
  require(net_spec.output_dim == train.answers.num_classes(),
          "train_em_classification: network outputs ", net_spec.output_dim,
          " classes but the answers have ", train.answers.num_classes());

  EmTrainResult res;
  res.network = build_network(net_spec, opts.seed);
  res.state.em_schedule = em_schedule;
  res.state.posteriors = vote_soft_counts(train.answers);
  res.state.confusions =
      m_step_confusions(res.state.posteriors, train.answers, prior_strength);

  Optimizer opt(opts.optimizer);
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const double loss =
        m_step_network(res.network, opt, train.features, res.state.posteriors,
                       1, opts.batch_size, opts.seed, epoch);
    const Tensor probs = res.network.forward(train.features, false);
    for (std::size_t s = 0; s < em_schedule; ++s) {
      res.state.posteriors =
          e_step_classification(probs, train.answers, res.state.confusions);
      res.state.confusions = m_step_confusions(res.state.posteriors,
                                               train.answers, prior_strength);
    }
    res.state.epoch = epoch + 1;
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss;
    entry.has_objective = true;
    entry.objective =
        em_objective(probs, train.answers, res.state.confusions,
                     prior_strength);
    if (eval_set != nullptr) {
      entry.has_metric = true;
      entry.metric = eval_metric(res.network, *eval_set);
    }
    res.log.push_back(entry);
  }
  return res;
}

EmTrainResult train_em_sequence(const NetworkSpec& net_spec,
                                const Dataset& train,
                                std::size_t em_schedule,
                                double prior_strength,
                                const TrainOptions& opts,
                                const Dataset* eval_set) {
  require(train.kind == TaskKind::sequence,
          "train_em_sequence: not a sequence dataset");
  // The factorized posterior treats tokens as independent given the network,
  // so the token-level view trains exactly like flat classification.
  Dataset flat = train;
  flat.kind = TaskKind::classification;
  flat.sentence_lengths.clear();
  Dataset flat_eval;
  if (eval_set != nullptr) {
    flat_eval = *eval_set;
    flat_eval.kind = TaskKind::classification;
    flat_eval.sentence_lengths.clear();
  }
  EmTrainResult res = train_em_classification(
      net_spec, flat, em_schedule, prior_strength, opts,
      eval_set != nullptr ? &flat_eval : nullptr);
  return res;
}

EmTrainResult train_em_regression(const NetworkSpec& net_spec,
                                  const Dataset& train,
                                  const TrainOptions& opts,
                                  const Dataset* eval_set) {
  require(train.kind == TaskKind::regression,
          "train_em_regression: not a regression dataset");
  train.answers.validate("train_em_regression");
  require(train.features.rows() == train.answers.num_items(),
          "train_em_regression: ", train.features.rows(), " feature rows vs ",
          train.answers.num_items(), " annotation rows");
  require(!net_spec.softmax_output && net_spec.output_dim == 1,
          "train_em_regression: needs a linear one-unit network");

  const std::size_t n = train.answers.num_items();
  EmTrainResult res;
  res.network = build_network(net_spec, opts.seed);
  res.state.em_schedule = 1;
  res.state.targets = mean_answer(train.answers);
  res.state.precisions.assign(train.answers.num_annotators(), 1.0);

  Optimizer opt(opts.optimizer);
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    Tensor targets = Tensor::matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      targets.at(i, 0) = res.state.targets[i];
    const double loss =
        train_one_epoch_mse(res.network, opt, train.features, targets,
                            opts.batch_size, opts.seed, epoch);
    const std::vector<double> preds =
        predict_values(res.network, train.features);
    const RegressionEmRound round =
        regression_em_round(train.answers, preds, res.state.targets);
    res.state.precisions = round.precisions;
    res.state.targets = round.targets;
    res.state.epoch = epoch + 1;
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss;
    if (eval_set != nullptr) {
      entry.has_metric = true;
      entry.metric = eval_metric(res.network, *eval_set);
    }
    res.log.push_back(entry);
  }
  return res;
}

}  // namespace crowd
