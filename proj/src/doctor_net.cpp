#include "crowd/doctor_net.hpp"

#include <cmath>
#include <memory>

#include "crowd/metrics.hpp"
#include "crowd/serialize.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

const char* combo_name(bool classification) {
  return classification ? "combo.z" : "combo.c";
}

void check_dataset(const MultiHeadNetwork& model, const Dataset& data,
                   const char* what) {
  data.answers.validate(what);
  require(data.features.rows() == data.answers.num_items(), what, ": ",
          data.features.rows(), " feature rows vs ", data.answers.num_items(),
          " annotation rows");
  require(data.answers.num_annotators() == model.heads.size(), what, ": ",
          data.answers.num_annotators(), " annotator columns vs ",
          model.heads.size(), " heads");
  require(model.classification == data.answers.is_classification(), what,
          ": head kind does not match the answer table");
  if (model.classification)
    require(data.answers.num_classes() == model.num_classes, what, ": ",
            data.answers.num_classes(), " label classes vs ",
            model.num_classes, " head classes");
}

std::vector<double> combination_weights(const Tensor& combo) {
  std::vector<double> a(combo.size());
  double mx = combo[0];
  for (std::size_t r = 1; r < combo.size(); ++r) mx = std::max(mx, combo[r]);
  double z = 0.0;
  for (std::size_t r = 0; r < combo.size(); ++r) {
    a[r] = std::exp(combo[r] - mx);
    z += a[r];
  }
  for (double& v : a) v /= z;
  return a;
}

std::vector<Tensor> head_outputs(MultiHeadNetwork& model, const Tensor& x) {
  const Tensor h = model.body.forward(x, false);
  std::vector<Tensor> out;
  out.reserve(model.heads.size());
  for (Graph& head : model.heads) out.push_back(head.forward(h, false));
  return out;
}

}  // namespace

std::vector<NamedParam> MultiHeadNetwork::params() {
  std::vector<NamedParam> out = body.params();
  for (Graph& head : heads)
    for (const NamedParam& p : head.params()) out.push_back(p);
  out.push_back({combo_name(classification), &combo, &combo_grad});
  return out;
}

void MultiHeadNetwork::zero_grad() {
  body.zero_grad();
  for (Graph& head : heads) head.zero_grad();
  combo_grad.fill(0.0);
}

nlohmann::json MultiHeadNetwork::to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["spec"] = {{"input_dim", spec.input_dim},
               {"hidden", spec.hidden},
               {"output_dim", spec.output_dim},
               {"dropout", spec.dropout},
               {"softmax_output", spec.softmax_output}};
  j["num_annotators"] = heads.size();
  j["params"] = checkpoint_to_json(params());
  return j;
}

MultiHeadNetwork MultiHeadNetwork::from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("spec") && j.contains("num_annotators")
              && j.contains("params"),
          "multi-head checkpoint: malformed JSON");
  const auto& s = j.at("spec");
  NetworkSpec spec;
  spec.input_dim = s.at("input_dim").get<std::size_t>();
  spec.hidden = s.at("hidden").get<std::vector<std::size_t>>();
  spec.output_dim = s.at("output_dim").get<std::size_t>();
  spec.dropout = s.at("dropout").get<double>();
  spec.softmax_output = s.at("softmax_output").get<bool>();
  MultiHeadNetwork m =
      build_multi_head(spec, j.at("num_annotators").get<std::size_t>(), 0);
  checkpoint_from_json(j.at("params"), m.params());
  return m;
}

MultiHeadNetwork build_multi_head(const NetworkSpec& spec,
                                  std::size_t num_annotators,
                                  std::uint64_t seed) {
  require(num_annotators > 0, "build_multi_head: need at least one head");
  require(spec.input_dim > 0, "build_multi_head: input_dim must be positive");
  require(spec.output_dim > 0,
          "build_multi_head: output_dim must be positive");
  // Draw order mirrors build_mlp so the one-head model shares its weights.
  Rng rng(seed);
  MultiHeadNetwork m;
  m.classification = spec.softmax_output;
  m.num_classes = spec.softmax_output ? spec.output_dim : 0;
  m.body = Graph(spec.input_dim);
  std::size_t in = spec.input_dim;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const std::size_t out = spec.hidden[i];
    require(out > 0, "build_multi_head: hidden width must be positive");
    Tensor w = Tensor::matrix(in, out);
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.normal(0.0, sd);
    m.body.add(std::make_unique<Dense>("dense" + std::to_string(i),
                                       std::move(w), Tensor::zeros({out})));
    m.body.add(std::make_unique<Relu>("relu" + std::to_string(i)));
    in = out;
  }
  if (spec.dropout > 0.0)
    m.body.add(
        std::make_unique<Dropout>("dropout", spec.dropout, rng.next_u64()));
  for (std::size_t r = 0; r < num_annotators; ++r) {
    Tensor w = Tensor::matrix(in, spec.output_dim);
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.normal(0.0, sd);
    Graph head(in);
    head.add(std::make_unique<Dense>("head" + std::to_string(r), std::move(w),
                                     Tensor::zeros({spec.output_dim})));
    if (spec.softmax_output)
      head.add(std::make_unique<Softmax>("softmax" + std::to_string(r)));
    m.heads.push_back(std::move(head));
  }
  m.combo = Tensor::zeros({num_annotators});
  m.combo_grad = Tensor::zeros({num_annotators});
  return m;
}

DnTrainResult train_dn(const NetworkSpec& net_spec, const Dataset& train,
                       const TrainOptions& opts, const Dataset* eval_set) {
  require(net_spec.softmax_output == (train.kind != TaskKind::regression),
          "train_dn: network head does not fit a ", to_string(train.kind),
          " task");
  DnTrainResult res;
  res.model = build_multi_head(net_spec, train.answers.num_annotators(),
                               network_init_seed(opts.seed));
  check_dataset(res.model, train, "train_dn");
  if (!res.model.classification)
    require(net_spec.output_dim == 1,
            "train_dn: regression heads must have one unit");

  // Stage one never touches the combination parameter.
  std::vector<NamedParam> trainable = res.model.body.params();
  for (Graph& head : res.model.heads)
    for (const NamedParam& p : head.params()) trainable.push_back(p);

  Optimizer opt(opts.optimizer);
  const std::size_t n = train.features.rows();
  const std::size_t num_r = res.model.heads.size();
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto batches = epoch_batches(n, opts.batch_size, opts.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Tensor xb = take_rows(train.features, batches[b]);
      const AnnotationTable yb = train.answers.rows(batches[b]);
      const double pairs = static_cast<double>(yb.total_answers());
      res.model.body.reseed_dropout(batch_seed(opts.seed, epoch, b));
      res.model.zero_grad();
      const Tensor h = res.model.body.forward(xb, true);
      Tensor dh = Tensor::zeros(h.shape);
      double loss = 0.0;
      for (std::size_t r = 0; r < num_r; ++r) {
        if (yb.answers_for_annotator(r) == 0) continue;
        const Tensor p = res.model.heads[r].forward(h, true);
        Tensor g = Tensor::zeros(p.shape);
        for (std::size_t i = 0; i < yb.num_items(); ++i) {
          if (!yb.present(i, r)) continue;
          if (res.model.classification) {
            const auto y = static_cast<std::size_t>(yb.label(i, r));
            loss -= std::log(p.at(i, y) + kLogFloor);
            g.at(i, y) = -1.0 / ((p.at(i, y) + kLogFloor) * pairs);
          } else {
            const double e = p.at(i, 0) - yb.value(i, r);
            loss += e * e;
            g.at(i, 0) = 2.0 * e / pairs;
          }
        }
        const Tensor hg = res.model.heads[r].backward(g);
        for (std::size_t j = 0; j < dh.size(); ++j) dh[j] += hg[j];
      }
      loss /= pairs;
      require(std::isfinite(loss), "train_dn: diverged at epoch ", epoch,
              ", batch ", b, ": non-finite loss");
      res.model.body.backward(dh);
      opt.step_params(trainable);
      res.model.body.mark_params_updated();
      for (Graph& head : res.model.heads) head.mark_params_updated();
      epoch_loss += loss * static_cast<double>(batches[b].size());
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(n);
    if (eval_set != nullptr) {
      entry.has_metric = true;
      entry.metric = eval_dn_metric(res.model, *eval_set, false);
    }
    res.log.push_back(entry);
  }
  return res;
}

TrainLog train_wdn_weights(MultiHeadNetwork& model, const Dataset& train,
                           const TrainOptions& opts, const Dataset* eval_set) {
  check_dataset(model, train, "train_wdn_weights");
  const std::size_t num_r = model.heads.size();
  const std::size_t n = train.features.rows();
  const NamedParam combo_param{combo_name(model.classification), &model.combo,
                               &model.combo_grad};
  Optimizer opt(opts.optimizer);
  TrainLog log;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto batches = epoch_batches(n, opts.batch_size, opts.seed, epoch);
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const Tensor xb = take_rows(train.features, batch);
      const AnnotationTable yb = train.answers.rows(batch);
      const double pairs = static_cast<double>(yb.total_answers());
      // Heads stay frozen: eval-mode forwards only, no backward below.
      const std::vector<Tensor> heads = head_outputs(model, xb);
      model.combo_grad.fill(0.0);
      double loss = 0.0;
      if (model.classification) {
        const std::vector<double> a = combination_weights(model.combo);
        Tensor combined = Tensor::zeros(heads[0].shape);
        for (std::size_t r = 0; r < num_r; ++r)
          for (std::size_t j = 0; j < combined.size(); ++j)
            combined[j] += a[r] * heads[r][j];
        std::vector<double> da(num_r, 0.0);
        for (std::size_t i = 0; i < yb.num_items(); ++i) {
          for (std::size_t r = 0; r < num_r; ++r) {
            if (!yb.present(i, r)) continue;
            const auto y = static_cast<std::size_t>(yb.label(i, r));
            const double cy = combined.at(i, y) + kLogFloor;
            loss -= std::log(cy);
            for (std::size_t s = 0; s < num_r; ++s)
              da[s] -= heads[s].at(i, y) / (cy * pairs);
          }
        }
        double dot = 0.0;
        for (std::size_t r = 0; r < num_r; ++r) dot += a[r] * da[r];
        for (std::size_t r = 0; r < num_r; ++r)
          model.combo_grad[r] = a[r] * (da[r] - dot);
      } else {
        std::vector<double> combined(yb.num_items(), 0.0);
        for (std::size_t i = 0; i < yb.num_items(); ++i) {
          for (std::size_t r = 0; r < num_r; ++r)
            combined[i] += heads[r].at(i, 0) + model.combo[r];
          combined[i] /= static_cast<double>(num_r);
        }
        for (std::size_t i = 0; i < yb.num_items(); ++i) {
          for (std::size_t r = 0; r < num_r; ++r) {
            if (!yb.present(i, r)) continue;
            const double e = combined[i] - yb.value(i, r);
            loss += e * e;
            const double g = 2.0 * e / (pairs * static_cast<double>(num_r));
            for (std::size_t s = 0; s < num_r; ++s) model.combo_grad[s] += g;
          }
        }
      }
      loss /= pairs;
      require(std::isfinite(loss),
              "train_wdn_weights: diverged: non-finite loss");
      opt.step_params({combo_param});
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(n);
    if (eval_set != nullptr) {
      entry.has_metric = true;
      entry.metric = eval_dn_metric(model, *eval_set, true);
    }
    log.push_back(entry);
  }
  return log;
}

std::vector<int> predict_dn_labels(MultiHeadNetwork& model, const Tensor& x,
                                   bool weighted) {
  require(model.classification, "predict_dn_labels: regression model");
  const std::vector<Tensor> heads = head_outputs(model, x);
  const std::size_t n = heads[0].rows();
  const std::size_t c = heads[0].cols();
  std::vector<int> out(n, 0);
  if (weighted) {
    const std::vector<double> a = combination_weights(model.combo);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_v = -1.0;
      for (std::size_t k = 0; k < c; ++k) {
        double v = 0.0;
        for (std::size_t r = 0; r < heads.size(); ++r)
          v += a[r] * heads[r].at(i, k);
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      out[i] = static_cast<int>(best);
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> votes(c, 0);
    for (const Tensor& p : heads) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k)
        if (p.at(i, k) > p.at(i, best)) best = k;
      ++votes[best];
    }
    std::size_t win = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (votes[k] > votes[win]) win = k;
    out[i] = static_cast<int>(win);
  }
  return out;
}

std::vector<double> predict_dn_values(MultiHeadNetwork& model,
                                      const Tensor& x, bool weighted) {
  require(!model.classification, "predict_dn_values: classification model");
  const std::vector<Tensor> heads = head_outputs(model, x);
  const std::size_t n = heads[0].rows();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t r = 0; r < heads.size(); ++r) {
      v += heads[r].at(i, 0);
      if (weighted) v += model.combo[r];
    }
    out[i] = v / static_cast<double>(heads.size());
  }
  return out;
}

double eval_dn_metric(MultiHeadNetwork& model, const Dataset& eval_set,
                      bool weighted) {
  require(eval_set.has_gold, "eval_dn_metric: dataset has no gold labels");
  if (model.classification) {
    const std::vector<int> pred =
        predict_dn_labels(model, eval_set.features, weighted);
    return accuracy(pred, eval_set.gold_labels);
  }
  const std::vector<double> pred =
      predict_dn_values(model, eval_set.features, weighted);
  return root_mean_squared_error(pred, eval_set.gold_values);
}

}  // namespace crowd
