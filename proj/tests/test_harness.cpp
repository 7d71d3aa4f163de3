#include "crowd/harness.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "crowd/aggregation.hpp"
#include "crowd/crowd_layer.hpp"
#include "crowd/em_crowd.hpp"
#include "crowd/metrics.hpp"
#include "crowd/serialize.hpp"
#include "doctest.h"

#include <unistd.h>

using crowd::AnnotatorProfile;
using crowd::Dataset;
using crowd::ExperimentConfig;
using crowd::Tensor;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("crowd_harness_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static std::size_t counter() {
    static std::size_t n = 0;
    return n++;
  }
  std::string str(const std::string& leaf) const {
    return (path / leaf).string();
  }
};

ExperimentConfig small_binary_config(const std::string& method) {
  ExperimentConfig cfg;
  cfg.task = crowd::TaskKind::classification;
  cfg.method = crowd::method_from_string(method);
  cfg.protocol = "paper-binary";
  cfg.hidden = {8};
  cfg.dropout = 0.0;
  cfg.optimizer.kind = crowd::OptimizerKind::adam;
  cfg.optimizer.learning_rate = 1e-2;
  cfg.epochs = 2;
  cfg.batch_size = 64;
  cfg.seed = 7;
  cfg.replicas = 2;
  return cfg;
}

}  // namespace

TEST_CASE("replica seeds are deterministic and distinct") {
  CHECK(crowd::replica_seed(5, 0) == crowd::replica_seed(5, 0));
  CHECK(crowd::replica_seed(5, 0) != crowd::replica_seed(5, 1));
  CHECK(crowd::replica_seed(5, 0) != crowd::replica_seed(6, 0));
}

TEST_CASE("label evaluation reports accuracy and sequence token scores") {
  Dataset gold;
  gold.kind = crowd::TaskKind::classification;
  gold.has_gold = true;
  gold.gold_labels = {1, 0, 1, 1};
  const auto m = crowd::evaluate_labels({1, 1, 1, 0}, gold);
  REQUIRE(m.size() == 1);
  CHECK(m[0].first == "accuracy");
  CHECK(m[0].second == 50.0);

  Dataset seq;
  seq.kind = crowd::TaskKind::sequence;
  seq.has_gold = true;
  seq.gold_labels = {0, 1, 2, 0, 1};
  const auto s = crowd::evaluate_labels({0, 1, 1, 1, 1}, seq);
  REQUIRE(s.size() == 4);
  CHECK(s[0].first == "accuracy");
  CHECK(s[1].first == "precision");
  CHECK(s[1].second == doctest::Approx(0.5));
  CHECK(s[2].first == "recall");
  CHECK(s[2].second == doctest::Approx(2.0 / 3.0));
  CHECK(s[3].first == "f1");
  CHECK(s[3].second == doctest::Approx(4.0 / 7.0));

  Dataset empty;
  empty.kind = crowd::TaskKind::classification;
  CHECK_THROWS_AS(crowd::evaluate_labels({0}, empty), crowd::Error);
  CHECK_THROWS_AS(crowd::evaluate_labels({0, 1}, gold), crowd::Error);
}

TEST_CASE("value evaluation matches the metric functions") {
  Dataset gold;
  gold.kind = crowd::TaskKind::regression;
  gold.has_gold = true;
  gold.gold_values = {1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> pred = {2.0, 1.0, 4.0, 3.0, 7.0};
  const auto m = crowd::evaluate_values(pred, gold);
  REQUIRE(m.size() == 3);
  CHECK(m[0].first == "mae");
  CHECK(m[0].second == crowd::mean_absolute_error(pred, gold.gold_values));
  CHECK(m[1].first == "rmse");
  CHECK(m[1].second ==
        crowd::root_mean_squared_error(pred, gold.gold_values));
  CHECK(m[2].first == "r2");
  CHECK(m[2].second == crowd::r_squared(pred, gold.gold_values));
  CHECK_THROWS_AS(crowd::evaluate_values({1.0}, gold), crowd::Error);
}

TEST_CASE("the harness replays the hand-built majority-vote pipeline") {
  ExperimentConfig cfg = small_binary_config("mv");
  cfg.replicas = 1;
  cfg.epochs = 3;
  const auto res = crowd::run_experiment(cfg);
  REQUIRE(res.replicas.size() == 1);
  const auto& out = res.replicas[0];
  REQUIRE(out.ok);
  REQUIRE(out.log.size() == 3);

  // The same pipeline composed by hand from the public pieces.
  const std::uint64_t seed = crowd::replica_seed(cfg.seed, 0);
  CHECK(out.seed == seed);
  const auto ge = crowd::generate_experiment(crowd::protocol("paper-binary"),
                                             seed);
  crowd::NetworkSpec spec;
  spec.input_dim = ge.train.data.features.cols();
  spec.hidden = cfg.hidden;
  spec.output_dim = ge.train.data.answers.num_classes();
  spec.dropout = cfg.dropout;
  spec.softmax_output = true;
  crowd::TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.optimizer = cfg.optimizer;
  opts.seed = seed;
  crowd::Graph net = crowd::build_network(spec, seed);
  const Tensor targets =
      crowd::one_hot(crowd::majority_vote(ge.train.data.answers), 2);
  const auto log = crowd::train_supervised(net, ge.train.data.features,
                                           targets, true, opts, &ge.test);
  REQUIRE(log.size() == out.log.size());
  for (std::size_t e = 0; e < log.size(); ++e) {
    REQUIRE(out.log[e].loss == log[e].loss);
    REQUIRE(out.log[e].metric == log[e].metric);
  }
  const auto preds = crowd::predict_labels(net, ge.test.features);
  const auto manual = crowd::evaluate_labels(preds, ge.test);
  REQUIRE(out.metrics.size() == manual.size());
  for (std::size_t i = 0; i < manual.size(); ++i) {
    CHECK(out.metrics[i].first == manual[i].first);
    CHECK(out.metrics[i].second == manual[i].second);
  }
}

TEST_CASE("metrics json is byte-identical across repeated runs") {
  const ExperimentConfig cfg = small_binary_config("cl-mw");
  const auto a = crowd::run_experiment(cfg);
  const auto b = crowd::run_experiment(cfg);
  CHECK(crowd::metrics_json(a).dump() == crowd::metrics_json(b).dump());
  CHECK(crowd::recovery_json(a).dump() == crowd::recovery_json(b).dump());
  // Wall clock lives only in the timing report.
  CHECK(crowd::metrics_json(a).dump().find("seconds") == std::string::npos);
  CHECK(crowd::timing_json(a).dump().find("seconds") != std::string::npos);
}

TEST_CASE("a diverging replica is recorded as partial, not fatal") {
  ExperimentConfig cfg;
  cfg.task = crowd::TaskKind::regression;
  cfg.method = crowd::Method::mean;
  cfg.protocol = "paper-regression";
  cfg.hidden = {8};
  cfg.dropout = 0.0;
  cfg.optimizer.kind = crowd::OptimizerKind::sgd;
  cfg.optimizer.learning_rate = 1e30;  // guarantees a non-finite loss
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.seed = 1;
  cfg.replicas = 1;
  const auto res = crowd::run_experiment(cfg);
  CHECK(res.partial);
  REQUIRE(res.replicas.size() == 1);
  CHECK_FALSE(res.replicas[0].ok);
  CHECK(res.replicas[0].error.find("diverged") != std::string::npos);

  const auto j = crowd::metrics_json(res);
  CHECK(j.at("partial").get<bool>());
  CHECK(j.at("replicas")[0].at("ok").get<bool>() == false);
  CHECK(j.at("replicas")[0].contains("error"));
  CHECK(j.at("summary").empty());
}

TEST_CASE("run_experiment works from files and fills ds checkpoints") {
  TempDir tmp;
  crowd::TaskSpec ts = crowd::protocol("paper-binary");
  ts.n_train = 120;
  ts.n_test = 60;
  const auto ge = crowd::generate_experiment(ts, 5);
  crowd::save_dataset(ge.train.data, tmp.str("x.csv"), tmp.str("y.csv"),
                      tmp.str("g.csv"));
  crowd::save_dataset(ge.test, tmp.str("tx.csv"), "", tmp.str("tg.csv"));

  ExperimentConfig cfg;
  cfg.task = crowd::TaskKind::classification;
  cfg.method = crowd::Method::ds;
  cfg.features = tmp.str("x.csv");
  cfg.answers = tmp.str("y.csv");
  cfg.gold = tmp.str("g.csv");
  cfg.test_features = tmp.str("tx.csv");
  cfg.test_gold = tmp.str("tg.csv");
  cfg.hidden = {8};
  cfg.dropout = 0.0;
  cfg.optimizer.kind = crowd::OptimizerKind::adam;
  cfg.optimizer.learning_rate = 1e-2;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.seed = 2;
  cfg.replicas = 2;
  const auto res = crowd::run_experiment(cfg);
  CHECK_FALSE(res.partial);
  REQUIRE(res.replicas.size() == 2);
  for (const auto& out : res.replicas) {
    REQUIRE(out.ok);
    CHECK(out.checkpoint.contains("network"));
    CHECK(out.checkpoint.contains("aggregation"));
    CHECK(out.checkpoint.at("aggregation").contains("confusions"));
    CHECK(crowd::checkpoint_has_annotator_params(out.checkpoint));
    REQUIRE_FALSE(out.metrics.empty());
    CHECK(out.metrics[0].first == "accuracy");
    // File replicas see the same data but different network seeds.
    CHECK(out.recovery.is_null());  // no simulator profiles on file data
  }
  CHECK(res.replicas[0].seed != res.replicas[1].seed);
  CHECK(crowd::recovery_json(res).is_null());
}

TEST_CASE("the run directory holds metrics, timing, logs, checkpoints") {
  TempDir tmp;
  ExperimentConfig cfg = small_binary_config("cl-mw");
  const auto res = crowd::run_experiment(cfg);
  const std::string dir = tmp.str("run");
  crowd::write_experiment(res, dir);

  namespace fs = std::filesystem;
  CHECK(fs::exists(dir + "/metrics.json"));
  CHECK(fs::exists(dir + "/timing.json"));
  CHECK(fs::exists(dir + "/recovery.json"));
  for (const std::string rep : {"replica_0", "replica_1"}) {
    CHECK(fs::exists(dir + "/" + rep + "/train.log"));
    CHECK(fs::exists(dir + "/" + rep + "/checkpoint.json"));
  }
  std::ifstream log(dir + "/replica_0/train.log");
  std::string header;
  std::getline(log, header);
  CHECK(header == "epoch,loss,metric,objective");
  std::size_t rows = 0;
  for (std::string line; std::getline(log, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == cfg.epochs);

  const auto written = crowd::read_json_file(dir + "/metrics.json");
  CHECK(written.at("schema") == "crowdlearn-metrics-v1");
  CHECK(written.dump() == crowd::metrics_json(res).dump());
  const auto ckpt = crowd::read_json_file(dir + "/replica_0/checkpoint.json");
  CHECK(ckpt.at("method") == "cl-mw");
  CHECK(ckpt.contains("crowd_params"));
}

TEST_CASE("confusion recovery keeps the truth-row, answer-column layout") {
  // One annotator, strong pull from truth 0 toward answer 1.
  crowd::CrowdParams p(crowd::CrowdVariant::mw, 1, 2);
  {
    auto named = p.params();
    *named[0].value = Tensor::matrix(2, 2, {0.0, 0.0, 3.0, 0.0});
  }
  nlohmann::json ckpt;
  ckpt["method"] = "cl-mw";
  ckpt["task"] = "classification";
  ckpt["crowd_params"] = p.to_json();
  CHECK(crowd::checkpoint_has_annotator_params(ckpt));

  const std::vector<AnnotatorProfile> profs = {
      AnnotatorProfile::binary(0.9, 0.8)};
  const auto rec = crowd::diagnose_recovery(ckpt, profs);
  CHECK(rec.at("source") == "crowd-mw");
  const auto& ann = rec.at("annotators")[0];
  // Implied confusion: each truth column of W softmaxed over answers.
  // Column 0 is (0, 3), so truth 0 leans toward answer 1.
  const double e3 = std::exp(3.0);
  CHECK(ann.at("implied_confusion").at("data")[1].get<double>() ==
        doctest::Approx(e3 / (1.0 + e3)));
  CHECK(ann.at("largest_offdiag").at("truth").get<int>() == 0);
  CHECK(ann.at("largest_offdiag").at("answer").get<int>() == 1);
  CHECK(ann.at("largest_offdiag").at("value").get<double>() ==
        doctest::Approx(e3 / (1.0 + e3)));
  // True binary confusion rows are (beta, 1-beta) and (1-alpha, alpha).
  CHECK(ann.at("true_confusion").at("data")[0].get<double>() ==
        doctest::Approx(0.8));
  CHECK(ann.at("true_confusion").at("data")[3].get<double>() ==
        doctest::Approx(0.9));
  CHECK(rec.at("correlation_skipped").get<bool>());
}

TEST_CASE("exact confusions give zero cell error and perfect correlation") {
  const std::vector<AnnotatorProfile> profs = {
      AnnotatorProfile::binary(0.9, 0.8), AnnotatorProfile::binary(0.6, 0.7)};
  nlohmann::json agg;
  nlohmann::json arr = nlohmann::json::array();
  arr.push_back(crowd::tensor_to_json(
      Tensor::matrix(2, 2, {0.8, 0.2, 0.1, 0.9})));
  arr.push_back(crowd::tensor_to_json(
      Tensor::matrix(2, 2, {0.7, 0.3, 0.4, 0.6})));
  agg["confusions"] = arr;
  nlohmann::json ckpt;
  ckpt["method"] = "ds";
  ckpt["task"] = "classification";
  ckpt["aggregation"] = agg;
  const auto rec = crowd::diagnose_recovery(ckpt, profs);
  CHECK(rec.at("source") == "ds");
  CHECK(rec.at("mean_abs_cell_error").get<double>() ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rec.at("diag_correlation").get<double>() == doctest::Approx(1.0));
}

TEST_CASE("em checkpoints diagnose from their stored state") {
  crowd::EmState s;
  s.confusions = {Tensor::matrix(2, 2, {0.8, 0.2, 0.1, 0.9}),
                  Tensor::matrix(2, 2, {0.7, 0.3, 0.4, 0.6})};
  nlohmann::json ckpt;
  ckpt["method"] = "em";
  ckpt["task"] = "classification";
  ckpt["em_state"] = s.to_json();
  const std::vector<AnnotatorProfile> profs = {
      AnnotatorProfile::binary(0.9, 0.8), AnnotatorProfile::binary(0.6, 0.7)};
  const auto rec = crowd::diagnose_recovery(ckpt, profs);
  CHECK(rec.at("source") == "em");
  CHECK(rec.at("mean_abs_cell_error").get<double>() ==
        doctest::Approx(0.0).epsilon(1e-15));

  crowd::EmState reg;
  reg.precisions = {2.0, 0.5};
  nlohmann::json rckpt;
  rckpt["method"] = "em";
  rckpt["task"] = "regression";
  rckpt["em_state"] = reg.to_json();
  const std::vector<AnnotatorProfile> rprofs = {
      AnnotatorProfile::regression(1.0, 0.5),
      AnnotatorProfile::regression(-2.0, 1.0)};
  const auto rrec = crowd::diagnose_recovery(rckpt, rprofs);
  CHECK(rrec.at("source") == "regression-em");
  CHECK(rrec.at("annotators")[0].at("precision").get<double>() == 2.0);
  CHECK(rrec.at("annotators")[1].at("true_bias").get<double>() == -2.0);
}

TEST_CASE("regression crowd parameters echo scale and correlate bias") {
  crowd::CrowdParams p(crowd::CrowdVariant::sb, 3, 0);
  const std::vector<AnnotatorProfile> profs = {
      AnnotatorProfile::regression(1.0, 0.3),
      AnnotatorProfile::regression(-2.0, 0.5),
      AnnotatorProfile::regression(0.5, 0.8)};
  {
    auto named = p.params();
    // Layout per annotator: scale then bias. Biases match truth exactly.
    named[1].value->data[0] = 1.0;
    named[3].value->data[0] = -2.0;
    named[5].value->data[0] = 0.5;
    named[0].value->data[0] = 1.1;
  }
  nlohmann::json ckpt;
  ckpt["method"] = "cl-s+b";
  ckpt["task"] = "regression";
  ckpt["crowd_params"] = p.to_json();
  const auto rec = crowd::diagnose_recovery(ckpt, profs);
  CHECK(rec.at("source") == "crowd-s+b");
  CHECK(rec.at("annotators")[0].at("scale").get<double>() ==
        doctest::Approx(1.1));
  CHECK(rec.at("annotators")[1].at("bias").get<double>() ==
        doctest::Approx(-2.0));
  CHECK(rec.at("annotators")[1].at("true_noise_sd").get<double>() == 0.5);
  CHECK(rec.at("bias_correlation").get<double>() == doctest::Approx(1.0));
}

TEST_CASE("checkpoints without annotator parameters are rejected by name") {
  nlohmann::json ckpt;
  ckpt["method"] = "mv";
  ckpt["task"] = "classification";
  ckpt["network"] = nlohmann::json::object();
  CHECK_FALSE(crowd::checkpoint_has_annotator_params(ckpt));
  const std::vector<AnnotatorProfile> profs = {
      AnnotatorProfile::binary(0.9, 0.8)};
  try {
    crowd::diagnose_recovery(ckpt, profs);
    FAIL("expected a diagnosis error");
  } catch (const crowd::Error& e) {
    CHECK(std::string(e.what()).find("mv") != std::string::npos);
  }
}

TEST_CASE("profile count mismatches are rejected") {
  crowd::CrowdParams p(crowd::CrowdVariant::mw, 2, 2);
  nlohmann::json ckpt;
  ckpt["method"] = "cl-mw";
  ckpt["task"] = "classification";
  ckpt["crowd_params"] = p.to_json();
  const std::vector<AnnotatorProfile> one = {
      AnnotatorProfile::binary(0.9, 0.8)};
  CHECK_THROWS_AS(crowd::diagnose_recovery(ckpt, one), crowd::Error);
}

TEST_CASE("the output root honors its environment override") {
  ::unsetenv("CROWD_OUT_ROOT");
  CHECK(crowd::output_root() == "out");
  ::setenv("CROWD_OUT_ROOT", "/tmp/elsewhere", 1);
  CHECK(crowd::output_root() == "/tmp/elsewhere");
  ::unsetenv("CROWD_OUT_ROOT");
}
