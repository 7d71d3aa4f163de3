#include "crowd/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "crowd/aggregation.hpp"
#include "crowd/crowd_layer.hpp"
#include "crowd/doctor_net.hpp"
#include "crowd/em_crowd.hpp"
#include "crowd/metrics.hpp"
#include "crowd/serialize.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

constexpr std::uint64_t kTagReplica = 0x7265706c;
constexpr std::uint64_t kTagWdnStage = 0x77646e;

CrowdVariant variant_for(Method m) {
  switch (m) {
    case Method::cl_vw: return CrowdVariant::vw;
    case Method::cl_vwb: return CrowdVariant::vwb;
    case Method::cl_mw: return CrowdVariant::mw;
    case Method::cl_s: return CrowdVariant::s;
    case Method::cl_b: return CrowdVariant::b;
    case Method::cl_sb: return CrowdVariant::sb;
    default: fail("not a crowd-layer method: ", to_string(m));
  }
}

Tensor column(const std::vector<double>& v) {
  Tensor t = Tensor::matrix(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t.at(i, 0) = v[i];
  return t;
}

struct ReplicaData {
  Dataset train;
  Dataset test;
  bool have_test = false;
  std::vector<AnnotatorProfile> profiles;
  bool have_profiles = false;
};

// Response distribution per true class implied by a crowd mapping matrix:
// softmax over the answer axis of each truth column.
Tensor implied_confusion(const Tensor& w) {
  const std::size_t c = w.rows();
  Tensor imp = Tensor::matrix(c, c);
  for (std::size_t truth = 0; truth < c; ++truth) {
    double mx = w.at(0, truth);
    for (std::size_t l = 1; l < c; ++l) mx = std::max(mx, w.at(l, truth));
    double z = 0.0;
    for (std::size_t l = 0; l < c; ++l) {
      const double e = std::exp(w.at(l, truth) - mx);
      imp.at(truth, l) = e;
      z += e;
    }
    for (std::size_t l = 0; l < c; ++l) imp.at(truth, l) /= z;
  }
  return imp;
}

Tensor true_confusion(const AnnotatorProfile& p, std::size_t c,
                      std::size_t annotator) {
  switch (p.kind) {
    case AnnotatorProfile::Kind::binary: {
      require(c == 2, "diagnose: annotator ", annotator,
              " has a binary profile but the parameters cover ", c,
              " classes");
      Tensor t = Tensor::matrix(2, 2);
      t.at(0, 0) = p.beta;
      t.at(0, 1) = 1.0 - p.beta;
      t.at(1, 0) = 1.0 - p.alpha;
      t.at(1, 1) = p.alpha;
      return t;
    }
    case AnnotatorProfile::Kind::confusion:
      require(p.confusion.rows() == c, "diagnose: annotator ", annotator,
              " profile covers ", p.confusion.rows(), " classes, parameters ",
              c);
      return p.confusion;
    case AnnotatorProfile::Kind::regression:
      fail("diagnose: annotator ", annotator,
           " has a regression profile but the parameters are class-based");
  }
  fail("unreachable profile kind");
}

nlohmann::json offdiag_entry(const Tensor& conf) {
  const std::size_t c = conf.rows();
  std::size_t bt = 0, bl = 1;
  double best = -1.0;
  for (std::size_t truth = 0; truth < c; ++truth)
    for (std::size_t l = 0; l < c; ++l) {
      if (l == truth) continue;
      if (conf.at(truth, l) > best) {
        best = conf.at(truth, l);
        bt = truth;
        bl = l;
      }
    }
  return {{"truth", bt}, {"answer", bl}, {"value", best}};
}

// Pooled diagonal correlation plus the skip flag demanded for R = 1.
void attach_diag_correlation(nlohmann::json& out,
                             const std::vector<double>& learned,
                             const std::vector<double>& truth,
                             std::size_t num_annotators) {
  if (num_annotators < 2) {
    out["correlation_skipped"] = true;
    out["skip_reason"] = "single annotator";
    return;
  }
  try {
    out["diag_correlation"] = pearson(learned, truth);
  } catch (const Error& e) {
    out["correlation_skipped"] = true;
    out["skip_reason"] = e.what();
  }
}

nlohmann::json diagnose_confusions(const std::vector<Tensor>& learned,
                                   const std::vector<AnnotatorProfile>& profs,
                                   const std::string& source) {
  require(learned.size() == profs.size(), "diagnose: ", learned.size(),
          " learned confusions vs ", profs.size(), " profiles");
  nlohmann::json out;
  out["source"] = source;
  nlohmann::json anns = nlohmann::json::array();
  std::vector<double> learned_diag, truth_diag;
  double cell_err = 0.0;
  for (std::size_t r = 0; r < learned.size(); ++r) {
    const std::size_t c = learned[r].rows();
    const Tensor truth = true_confusion(profs[r], c, r);
    nlohmann::json a;
    a["learned_confusion"] = tensor_to_json(learned[r]);
    a["true_confusion"] = tensor_to_json(truth);
    a["largest_offdiag"] = offdiag_entry(learned[r]);
    nlohmann::json ld = nlohmann::json::array();
    nlohmann::json td = nlohmann::json::array();
    double err = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      learned_diag.push_back(learned[r].at(k, k));
      truth_diag.push_back(truth.at(k, k));
      ld.push_back(learned[r].at(k, k));
      td.push_back(truth.at(k, k));
    }
    for (std::size_t j = 0; j < learned[r].size(); ++j)
      err += std::abs(learned[r][j] - truth[j]);
    err /= static_cast<double>(learned[r].size());
    a["learned_diag"] = ld;
    a["true_diag"] = td;
    a["abs_cell_error"] = err;
    cell_err += err;
    anns.push_back(a);
  }
  out["annotators"] = anns;
  out["mean_abs_cell_error"] = cell_err / static_cast<double>(learned.size());
  attach_diag_correlation(out, learned_diag, truth_diag, learned.size());
  return out;
}

nlohmann::json diagnose_classification_crowd(
    const CrowdParams& p, const std::vector<AnnotatorProfile>& profs) {
  nlohmann::json out;
  out["source"] = "crowd-" + to_string(p.variant());
  nlohmann::json anns = nlohmann::json::array();
  std::vector<double> learned_diag, truth_diag;
  const bool matrix_variant = p.variant() == CrowdVariant::mw;
  double cell_err = 0.0;
  for (std::size_t r = 0; r < p.num_annotators(); ++r) {
    const std::size_t c = p.num_classes();
    const Tensor truth = true_confusion(profs[r], c, r);
    nlohmann::json a;
    a["true_confusion"] = tensor_to_json(truth);
    nlohmann::json ld = nlohmann::json::array();
    nlohmann::json td = nlohmann::json::array();
    if (matrix_variant) {
      const Tensor& w = p.matrix(r);
      const Tensor imp = implied_confusion(w);
      a["learned"] = tensor_to_json(w);
      a["implied_confusion"] = tensor_to_json(imp);
      a["largest_offdiag"] = offdiag_entry(imp);
      double err = 0.0;
      for (std::size_t j = 0; j < imp.size(); ++j)
        err += std::abs(imp[j] - truth[j]);
      err /= static_cast<double>(imp.size());
      a["abs_cell_error"] = err;
      cell_err += err;
      for (std::size_t k = 0; k < c; ++k) {
        learned_diag.push_back(w.at(k, k));
        truth_diag.push_back(truth.at(k, k));
        ld.push_back(w.at(k, k));
        td.push_back(truth.at(k, k));
      }
    } else {
      const Tensor& w = p.weight_vector(r);
      a["learned_weights"] = tensor_to_json(w);
      if (p.variant() == CrowdVariant::vwb)
        a["learned_bias"] = tensor_to_json(p.bias_vector(r));
      for (std::size_t k = 0; k < c; ++k) {
        learned_diag.push_back(w[k]);
        truth_diag.push_back(truth.at(k, k));
        ld.push_back(w[k]);
        td.push_back(truth.at(k, k));
      }
    }
    a["learned_diag"] = ld;
    a["true_diag"] = td;
    anns.push_back(a);
  }
  out["annotators"] = anns;
  if (matrix_variant)
    out["mean_abs_cell_error"] =
        cell_err / static_cast<double>(p.num_annotators());
  attach_diag_correlation(out, learned_diag, truth_diag, p.num_annotators());
  return out;
}

nlohmann::json diagnose_regression_crowd(
    const CrowdParams& p, const std::vector<AnnotatorProfile>& profs) {
  nlohmann::json out;
  out["source"] = "crowd-" + to_string(p.variant());
  const bool has_scale =
      p.variant() == CrowdVariant::s || p.variant() == CrowdVariant::sb;
  const bool has_bias =
      p.variant() == CrowdVariant::b || p.variant() == CrowdVariant::sb;
  nlohmann::json anns = nlohmann::json::array();
  std::vector<double> learned_bias, true_bias;
  for (std::size_t r = 0; r < p.num_annotators(); ++r) {
    require(profs[r].kind == AnnotatorProfile::Kind::regression,
            "diagnose: annotator ", r,
            " has a class profile but the parameters are regression-based");
    nlohmann::json a;
    a["true_bias"] = profs[r].bias;
    a["true_noise_sd"] = profs[r].noise_sd;
    if (has_scale) a["scale"] = p.scale(r);
    if (has_bias) {
      a["bias"] = p.bias(r);
      learned_bias.push_back(p.bias(r));
      true_bias.push_back(profs[r].bias);
    }
    anns.push_back(a);
  }
  out["annotators"] = anns;
  if (has_bias) {
    if (p.num_annotators() < 2) {
      out["correlation_skipped"] = true;
      out["skip_reason"] = "single annotator";
    } else {
      try {
        out["bias_correlation"] = pearson(learned_bias, true_bias);
      } catch (const Error& e) {
        out["correlation_skipped"] = true;
        out["skip_reason"] = e.what();
      }
    }
  }
  return out;
}

nlohmann::json diagnose_regression_em(
    const std::vector<double>& precisions,
    const std::vector<AnnotatorProfile>& profs) {
  require(precisions.size() == profs.size(), "diagnose: ", precisions.size(),
          " precisions vs ", profs.size(), " profiles");
  nlohmann::json out;
  out["source"] = "regression-em";
  nlohmann::json anns = nlohmann::json::array();
  for (std::size_t r = 0; r < precisions.size(); ++r) {
    require(profs[r].kind == AnnotatorProfile::Kind::regression,
            "diagnose: annotator ", r,
            " has a class profile but the parameters are regression-based");
    anns.push_back({{"precision", precisions[r]},
                    {"true_bias", profs[r].bias},
                    {"true_noise_sd", profs[r].noise_sd}});
  }
  out["annotators"] = anns;
  return out;
}

void run_replica(const ExperimentConfig& cfg, const ReplicaData& data,
                 ReplicaOutcome& out) {
  const Dataset& train = data.train;
  const bool classify = train.kind != TaskKind::regression;

  NetworkSpec spec;
  spec.input_dim = train.features.cols();
  spec.hidden = cfg.hidden;
  spec.output_dim = classify ? train.answers.num_classes() : 1;
  spec.dropout = cfg.dropout;
  spec.softmax_output = classify;

  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.optimizer = cfg.optimizer;
  opts.seed = out.seed;

  const Dataset* eval_set =
      data.have_test && data.test.has_gold ? &data.test : nullptr;

  out.checkpoint = nlohmann::json::object();
  out.checkpoint["method"] = to_string(cfg.method);
  out.checkpoint["task"] = to_string(cfg.task);

  std::vector<int> pred_labels;
  std::vector<double> pred_values;
  bool have_preds = false;

  auto finish_graph = [&](Graph& net) {
    out.checkpoint["network"] = checkpoint_to_json(net.params());
    if (data.have_test) {
      if (classify)
        pred_labels = predict_labels(net, data.test.features);
      else
        pred_values = predict_values(net, data.test.features);
      have_preds = true;
    }
  };

  switch (cfg.method) {
    case Method::mv: {
      const Tensor targets = one_hot(majority_vote(train.answers),
                                     train.answers.num_classes());
      Graph net = build_network(spec, out.seed);
      out.log =
          train_supervised(net, train.features, targets, true, opts, eval_set);
      finish_graph(net);
      break;
    }
    case Method::ds: {
      const DawidSkeneResult agg =
          dawid_skene(train.answers, cfg.prior_strength);
      const Tensor targets =
          cfg.ds_labels == "hard"
              ? one_hot(hard_labels(agg.posteriors),
                        train.answers.num_classes())
              : agg.posteriors;
      Graph net = build_network(spec, out.seed);
      out.log =
          train_supervised(net, train.features, targets, true, opts, eval_set);
      finish_graph(net);
      nlohmann::json a;
      a["class_prior"] = tensor_to_json(agg.class_prior);
      nlohmann::json arr = nlohmann::json::array();
      for (const Tensor& pi : agg.confusions)
        arr.push_back(tensor_to_json(pi));
      a["confusions"] = arr;
      a["iterations"] = agg.iterations;
      a["converged"] = agg.converged;
      out.checkpoint["aggregation"] = a;
      break;
    }
    case Method::mean: {
      const Tensor targets = column(mean_answer(train.answers));
      Graph net = build_network(spec, out.seed);
      out.log = train_supervised(net, train.features, targets, false, opts,
                                 eval_set);
      finish_graph(net);
      break;
    }
    case Method::true_labels: {
      require(train.has_gold,
              "run_experiment: method true needs training gold");
      Graph net = build_network(spec, out.seed);
      if (classify) {
        const Tensor targets =
            one_hot(train.gold_labels, train.answers.num_classes());
        out.log = train_supervised(net, train.features, targets, true, opts,
                                   eval_set);
      } else {
        out.log = train_supervised(net, train.features,
                                   column(train.gold_values), false, opts,
                                   eval_set);
      }
      finish_graph(net);
      break;
    }
    case Method::em: {
      EmTrainResult r =
          !classify
              ? train_em_regression(spec, train, opts, eval_set)
              : (train.kind == TaskKind::sequence
                     ? train_em_sequence(spec, train, cfg.em_schedule,
                                         cfg.prior_strength, opts, eval_set)
                     : train_em_classification(spec, train, cfg.em_schedule,
                                               cfg.prior_strength, opts,
                                               eval_set));
      out.log = r.log;
      finish_graph(r.network);
      out.checkpoint["em_state"] = r.state.to_json();
      break;
    }
    case Method::dn:
    case Method::wdn: {
      DnTrainResult r = train_dn(spec, train, opts, eval_set);
      out.log = r.log;
      const bool weighted = cfg.method == Method::wdn;
      if (weighted) {
        TrainOptions stage2 = opts;
        stage2.seed = mix64(out.seed, kTagWdnStage);
        TrainLog second = train_wdn_weights(r.model, train, stage2, eval_set);
        for (EpochLog e : second) {
          e.epoch += opts.epochs;
          out.log.push_back(e);
        }
      }
      out.checkpoint["multi_head"] = r.model.to_json(spec);
      if (data.have_test) {
        if (classify)
          pred_labels =
              predict_dn_labels(r.model, data.test.features, weighted);
        else
          pred_values =
              predict_dn_values(r.model, data.test.features, weighted);
        have_preds = true;
      }
      break;
    }
    case Method::cl_vw:
    case Method::cl_vwb:
    case Method::cl_mw:
    case Method::cl_s:
    case Method::cl_b:
    case Method::cl_sb: {
      CrowdTrainResult r =
          train_crowd(spec, train, variant_for(cfg.method), opts, eval_set,
                      cfg.crowd_learning_rate, cfg.crowd_l2);
      out.log = r.log;
      Graph net = strip(r.network);
      finish_graph(net);
      out.checkpoint["crowd_params"] = r.params.to_json();
      break;
    }
  }

  if (have_preds && data.test.has_gold)
    out.metrics = classify ? evaluate_labels(pred_labels, data.test)
                           : evaluate_values(pred_values, data.test);

  if (data.have_profiles && checkpoint_has_annotator_params(out.checkpoint))
    out.recovery = diagnose_recovery(out.checkpoint, data.profiles);
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["task"] = to_string(cfg.task);
  j["method"] = to_string(cfg.method);
  j["protocol"] = cfg.protocol;
  j["features"] = cfg.features;
  j["answers"] = cfg.answers;
  j["gold"] = cfg.gold;
  j["test_features"] = cfg.test_features;
  j["test_gold"] = cfg.test_gold;
  j["num_classes"] = cfg.num_classes;
  j["hidden"] = cfg.hidden;
  j["dropout"] = cfg.dropout;
  j["optimizer"] = to_string(cfg.optimizer.kind);
  j["learning_rate"] = cfg.optimizer.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["replicas"] = cfg.replicas;
  j["em_schedule"] = cfg.em_schedule;
  j["prior_strength"] = cfg.prior_strength;
  j["ds_labels"] = cfg.ds_labels;
  j["crowd_learning_rate"] = cfg.crowd_learning_rate;
  j["crowd_l2"] = cfg.crowd_l2;
  return j;
}

void summarize(nlohmann::json& summary, const std::string& name,
               const std::vector<double>& values) {
  if (values.empty()) return;
  const auto [mean, sd] = mean_sd(values);
  nlohmann::json s;
  s["mean"] = mean;
  s["count"] = values.size();
  if (values.size() >= 2) s["sd"] = sd;
  summary[name] = s;
}

}  // namespace

std::uint64_t replica_seed(std::uint64_t base, std::size_t k) {
  return mix64(base, kTagReplica + k);
}

std::vector<std::pair<std::string, double>> evaluate_labels(
    const std::vector<int>& pred, const Dataset& gold_set) {
  require(gold_set.has_gold && !gold_set.gold_labels.empty(),
          "evaluate: no gold labels");
  require(pred.size() == gold_set.gold_labels.size(), "evaluate: ",
          pred.size(), " predictions vs ", gold_set.gold_labels.size(),
          " gold labels");
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("accuracy", accuracy(pred, gold_set.gold_labels));
  if (gold_set.kind == TaskKind::sequence) {
    const TokenPrf prf = token_prf(pred, gold_set.gold_labels);
    out.emplace_back("precision", prf.precision);
    out.emplace_back("recall", prf.recall);
    out.emplace_back("f1", prf.f1);
  }
  return out;
}

std::vector<std::pair<std::string, double>> evaluate_values(
    const std::vector<double>& pred, const Dataset& gold_set) {
  require(gold_set.has_gold && !gold_set.gold_values.empty(),
          "evaluate: no gold values");
  require(pred.size() == gold_set.gold_values.size(), "evaluate: ",
          pred.size(), " predictions vs ", gold_set.gold_values.size(),
          " gold values");
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("mae", mean_absolute_error(pred, gold_set.gold_values));
  out.emplace_back("rmse",
                   root_mean_squared_error(pred, gold_set.gold_values));
  out.emplace_back("r2", r_squared(pred, gold_set.gold_values));
  return out;
}

bool checkpoint_has_annotator_params(const nlohmann::json& checkpoint) {
  return checkpoint.is_object() &&
         (checkpoint.contains("crowd_params") ||
          checkpoint.contains("em_state") ||
          checkpoint.contains("aggregation"));
}

nlohmann::json diagnose_recovery(
    const nlohmann::json& checkpoint,
    const std::vector<AnnotatorProfile>& profiles) {
  require(checkpoint.is_object() && checkpoint.contains("method"),
          "diagnose: malformed checkpoint");
  require(!profiles.empty(), "diagnose: no profiles");
  if (checkpoint.contains("crowd_params")) {
    const CrowdParams p =
        CrowdParams::from_json(checkpoint.at("crowd_params"));
    require(p.num_annotators() == profiles.size(), "diagnose: ",
            p.num_annotators(), " annotator mappings vs ", profiles.size(),
            " profiles");
    return is_classification_variant(p.variant())
               ? diagnose_classification_crowd(p, profiles)
               : diagnose_regression_crowd(p, profiles);
  }
  if (checkpoint.contains("em_state")) {
    const EmState s = EmState::from_json(checkpoint.at("em_state"));
    if (!s.confusions.empty())
      return diagnose_confusions(s.confusions, profiles, "em");
    if (!s.precisions.empty())
      return diagnose_regression_em(s.precisions, profiles);
    fail("diagnose: EM state holds no annotator parameters");
  }
  if (checkpoint.contains("aggregation")) {
    std::vector<Tensor> confusions;
    for (const auto& e : checkpoint.at("aggregation").at("confusions"))
      confusions.push_back(tensor_from_json(e, "aggregation confusion"));
    return diagnose_confusions(confusions, profiles, "ds");
  }
  fail("diagnose: checkpoint for method '",
       checkpoint.at("method").get<std::string>(),
       "' has no annotator parameters");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;

  const bool simulated = !cfg.protocol.empty();
  ReplicaData file_data;
  if (!simulated) {
    file_data.train = load_dataset(cfg.features, cfg.answers, cfg.gold,
                                   cfg.task, cfg.num_classes);
    if (!cfg.test_features.empty()) {
      file_data.test =
          load_dataset(cfg.test_features, "", cfg.test_gold, cfg.task,
                       file_data.train.answers.num_classes());
      file_data.have_test = true;
    }
  }
  const TaskSpec task_spec = simulated ? protocol(cfg.protocol) : TaskSpec{};

  for (std::size_t k = 0; k < cfg.replicas; ++k) {
    ReplicaOutcome out;
    out.replica = k;
    out.seed = replica_seed(cfg.seed, k);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (simulated) {
        const GeneratedExperiment ge = generate_experiment(task_spec, out.seed);
        ReplicaData data;
        data.train = ge.train.data;
        data.test = ge.test;
        data.have_test = true;
        data.profiles = ge.train.profiles;
        data.have_profiles = true;
        run_replica(cfg, data, out);
      } else {
        run_replica(cfg, file_data, out);
      }
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
      res.partial = true;
    }
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    res.replicas.push_back(std::move(out));
  }
  return res;
}

nlohmann::json metrics_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["schema"] = "crowdlearn-metrics-v1";
  j["config"] = config_json(result.config);
  j["partial"] = result.partial;
  nlohmann::json reps = nlohmann::json::array();
  for (const ReplicaOutcome& out : result.replicas) {
    nlohmann::json r;
    r["replica"] = out.replica;
    r["seed"] = out.seed;
    r["ok"] = out.ok;
    if (!out.ok) {
      r["error"] = out.error;
    } else {
      nlohmann::json m = nlohmann::json::object();
      for (const auto& [name, value] : out.metrics) m[name] = value;
      r["metrics"] = m;
    }
    reps.push_back(r);
  }
  j["replicas"] = reps;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> names;
  for (const ReplicaOutcome& out : result.replicas)
    if (out.ok)
      for (const auto& [name, value] : out.metrics) {
        bool seen = false;
        for (const std::string& n : names) seen = seen || n == name;
        if (!seen) names.push_back(name);
      }
  for (const std::string& name : names) {
    std::vector<double> values;
    for (const ReplicaOutcome& out : result.replicas) {
      if (!out.ok) continue;
      for (const auto& [n, value] : out.metrics)
        if (n == name) values.push_back(value);
    }
    summarize(summary, name, values);
  }
  j["summary"] = summary;
  return j;
}

nlohmann::json timing_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["schema"] = "crowdlearn-timing-v1";
  nlohmann::json reps = nlohmann::json::array();
  double total = 0.0;
  for (const ReplicaOutcome& out : result.replicas) {
    reps.push_back({{"replica", out.replica}, {"seconds", out.seconds}});
    total += out.seconds;
  }
  j["replicas"] = reps;
  j["total_seconds"] = total;
  return j;
}

nlohmann::json recovery_json(const ExperimentResult& result) {
  nlohmann::json reps = nlohmann::json::array();
  std::vector<double> diag_corr, bias_corr, cell_err;
  for (const ReplicaOutcome& out : result.replicas) {
    if (!out.ok || out.recovery.is_null()) continue;
    reps.push_back({{"replica", out.replica},
                    {"seed", out.seed},
                    {"report", out.recovery}});
    if (out.recovery.contains("diag_correlation"))
      diag_corr.push_back(out.recovery.at("diag_correlation").get<double>());
    if (out.recovery.contains("bias_correlation"))
      bias_corr.push_back(out.recovery.at("bias_correlation").get<double>());
    if (out.recovery.contains("mean_abs_cell_error"))
      cell_err.push_back(
          out.recovery.at("mean_abs_cell_error").get<double>());
  }
  if (reps.empty()) return nlohmann::json();
  nlohmann::json j;
  j["schema"] = "crowdlearn-recovery-v1";
  j["replicas"] = reps;
  nlohmann::json summary = nlohmann::json::object();
  summarize(summary, "diag_correlation", diag_corr);
  summarize(summary, "bias_correlation", bias_corr);
  summarize(summary, "mean_abs_cell_error", cell_err);
  j["summary"] = summary;
  return j;
}

void write_experiment(const ExperimentResult& result,
                      const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_file(out_dir + "/metrics.json", metrics_json(result).dump(2) + "\n");
  write_file(out_dir + "/timing.json", timing_json(result).dump(2) + "\n");
  const nlohmann::json rec = recovery_json(result);
  if (!rec.is_null())
    write_file(out_dir + "/recovery.json", rec.dump(2) + "\n");
  for (const ReplicaOutcome& out : result.replicas) {
    const std::string dir =
        out_dir + "/replica_" + std::to_string(out.replica);
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "epoch,loss,metric,objective\n";
    for (const EpochLog& e : out.log) {
      csv << e.epoch << "," << fmt_double(e.loss) << ",";
      if (e.has_metric) csv << fmt_double(e.metric);
      csv << ",";
      if (e.has_objective) csv << fmt_double(e.objective);
      csv << "\n";
    }
    write_file(dir + "/train.log", csv.str());
    if (out.ok)
      write_file(dir + "/checkpoint.json", out.checkpoint.dump(2) + "\n");
  }
}

std::string output_root() {
  const char* env = std::getenv("CROWD_OUT_ROOT");
  return env != nullptr && env[0] != '\0' ? env : "out";
}

}  // namespace crowd
