#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crowd/aggregation.hpp"
#include "crowd/bench.hpp"
#include "crowd/config.hpp"
#include "crowd/dataset.hpp"
#include "crowd/harness.hpp"
#include "crowd/metrics.hpp"
#include "crowd/serialize.hpp"
#include "crowd/simulate.hpp"
#include "crowd/util.hpp"

namespace {

// Single unheaded column; blank lines (sentence separators) are skipped.
std::vector<std::string> read_column(const std::string& path) {
  std::istringstream in(crowd::read_file(path));
  std::vector<std::string> cells;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string t = crowd::trim(raw);
    if (t.empty()) continue;
    crowd::require(t.find(',') == std::string::npos, path, " line ", line_no,
                   ": expected a single column");
    cells.push_back(t);
  }
  crowd::require(!cells.empty(), path, ": no data rows");
  return cells;
}

std::vector<int> parse_label_column(const std::vector<std::string>& cells,
                                    const std::string& path) {
  std::vector<int> out;
  out.reserve(cells.size());
  for (const std::string& c : cells) {
    std::size_t used = 0;
    const int v = std::stoi(c, &used);
    crowd::require(used == c.size() && v >= 0, path, ": '", c,
                   "' is not a label");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_value_column(const std::vector<std::string>& cells,
                                       const std::string& path) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const std::string& c : cells) {
    std::size_t used = 0;
    const double v = std::stod(c, &used);
    crowd::require(used == c.size(), path, ": '", c, "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::string default_out_dir(const crowd::ExperimentConfig& cfg) {
  const std::string source =
      cfg.protocol.empty() ? crowd::to_string(cfg.task) : cfg.protocol;
  return crowd::output_root() + "/" + crowd::to_string(cfg.method) + "-" +
         source + "-seed" + std::to_string(cfg.seed);
}

int cmd_simulate(const std::string& protocol_name, std::uint64_t seed,
                 const std::string& out_dir) {
  const crowd::GeneratedExperiment ge =
      crowd::generate_experiment(crowd::protocol(protocol_name), seed);
  std::filesystem::create_directories(out_dir);
  crowd::save_dataset(ge.train.data, out_dir + "/train_features.csv",
                      out_dir + "/train_answers.csv",
                      out_dir + "/train_gold.csv");
  crowd::save_dataset(ge.test, out_dir + "/test_features.csv", "",
                      out_dir + "/test_gold.csv");
  crowd::write_json_file(out_dir + "/profiles.json",
                         crowd::profiles_to_json(ge.train.profiles));
  nlohmann::json info;
  info["out"] = out_dir;
  info["protocol"] = protocol_name;
  info["seed"] = seed;
  info["n_train"] = ge.train.data.num_items();
  info["n_test"] = ge.test.num_items();
  info["annotators"] = ge.train.profiles.size();
  std::cout << info.dump() << "\n";
  return 0;
}

int cmd_train(const crowd::ExperimentConfig& cfg, const std::string& out_dir) {
  const crowd::ExperimentResult result = crowd::run_experiment(cfg);
  crowd::write_experiment(result, out_dir);
  nlohmann::json info;
  info["out"] = out_dir;
  info["partial"] = result.partial;
  info["summary"] = crowd::metrics_json(result)["summary"];
  std::cout << info.dump() << "\n";
  return 0;
}

int cmd_aggregate(const std::string& answers_path, const std::string& rule,
                  std::size_t num_classes, double prior_strength,
                  const std::string& out_path, const std::string& json_path) {
  std::ostringstream csv;
  if (rule == "mean") {
    const crowd::AnnotationTable table =
        crowd::load_answers(answers_path, crowd::TaskKind::regression);
    for (const double v : crowd::mean_answer(table))
      csv << crowd::fmt_double(v) << "\n";
  } else if (rule == "mv" || rule == "ds") {
    const crowd::AnnotationTable table = crowd::load_answers(
        answers_path, crowd::TaskKind::classification, num_classes);
    if (rule == "mv") {
      for (const int label : crowd::majority_vote(table)) csv << label << "\n";
    } else {
      const crowd::DawidSkeneResult res =
          crowd::dawid_skene(table, prior_strength);
      for (const int label : crowd::hard_labels(res.posteriors))
        csv << label << "\n";
      if (!json_path.empty()) {
        nlohmann::json j;
        j["posteriors"] = crowd::tensor_to_json(res.posteriors);
        nlohmann::json confusions = nlohmann::json::array();
        for (const crowd::Tensor& pi : res.confusions)
          confusions.push_back(crowd::tensor_to_json(pi));
        j["confusions"] = confusions;
        j["class_prior"] = crowd::tensor_to_json(res.class_prior);
        j["iterations"] = res.iterations;
        j["converged"] = res.converged;
        crowd::write_json_file(json_path, j);
      }
    }
  } else {
    crowd::fail("aggregate: unknown rule '", rule,
                "' (expected mv, ds, or mean)");
  }
  crowd::write_file(out_path, csv.str());
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gold_path,
                 const std::string& task_name) {
  const crowd::TaskKind task = crowd::task_kind_from_string(task_name);
  crowd::Dataset gold_set;
  gold_set.kind = task;
  gold_set.has_gold = true;
  std::vector<std::pair<std::string, double>> metrics;
  if (task == crowd::TaskKind::regression) {
    gold_set.gold_values =
        parse_value_column(read_column(gold_path), gold_path);
    metrics = crowd::evaluate_values(
        parse_value_column(read_column(pred_path), pred_path), gold_set);
  } else {
    gold_set.gold_labels =
        parse_label_column(read_column(gold_path), gold_path);
    metrics = crowd::evaluate_labels(
        parse_label_column(read_column(pred_path), pred_path), gold_set);
  }
  nlohmann::json j;
  for (const auto& [name, value] : metrics) j[name] = value;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_diagnose(const std::string& checkpoint_path,
                 const std::string& profiles_path,
                 const std::string& out_path) {
  const nlohmann::json checkpoint =
      nlohmann::json::parse(crowd::read_file(checkpoint_path));
  const std::vector<crowd::AnnotatorProfile> profiles =
      crowd::profiles_from_json(
          nlohmann::json::parse(crowd::read_file(profiles_path)));
  const nlohmann::json report = crowd::diagnose_recovery(checkpoint, profiles);
  if (out_path.empty())
    std::cout << report.dump(2) << "\n";
  else
    crowd::write_json_file(out_path, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdlearn: neural network training from crowd annotations"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand(
      "simulate", "Generate a synthetic dataset from a named protocol");
  std::string sim_protocol;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("--protocol", sim_protocol,
                  "Protocol name; see README for the list")
      ->required();
  sim->add_option("--seed", sim_seed, "Generator seed");
  sim->add_option("--out", sim_out, "Output directory")->required();

  auto* tr = app.add_subcommand(
      "train", "Run a seeded multi-replica experiment and write reports");
  std::string tr_config;
  std::vector<std::string> tr_sets;
  std::string tr_out;
  std::string tr_method, tr_task, tr_protocol, tr_seed, tr_replicas,
      tr_epochs;
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--set", tr_sets,
                 "Override one config key, e.g. --set epochs=20 (repeatable)");
  tr->add_option("--method", tr_method, "Shortcut for --set method=...");
  tr->add_option("--task", tr_task, "Shortcut for --set task=...");
  tr->add_option("--protocol", tr_protocol, "Shortcut for --set protocol=...");
  tr->add_option("--seed", tr_seed, "Shortcut for --set seed=...");
  tr->add_option("--replicas", tr_replicas, "Shortcut for --set replicas=...");
  tr->add_option("--epochs", tr_epochs, "Shortcut for --set epochs=...");
  tr->add_option("--out", tr_out,
                 "Output directory (default derives from the config under "
                 "$CROWD_OUT_ROOT)");

  auto* ag = app.add_subcommand(
      "aggregate", "Aggregate an answers table into per-item labels/values");
  std::string ag_answers, ag_rule, ag_out, ag_json;
  std::size_t ag_classes = 0;
  double ag_prior = 1.0;
  ag->add_option("--answers", ag_answers, "Answers CSV")->required();
  ag->add_option("--rule", ag_rule, "mv | ds | mean")->required();
  ag->add_option("--classes", ag_classes, "Class count (0 infers)");
  ag->add_option("--prior", ag_prior, "Dirichlet prior strength for ds");
  ag->add_option("--out", ag_out, "Output labels CSV")->required();
  ag->add_option("--json", ag_json,
                 "Also write ds posteriors/confusions JSON here");

  auto* ev = app.add_subcommand(
      "evaluate", "Score a prediction column against a gold column");
  std::string ev_pred, ev_gold, ev_task = "classification";
  ev->add_option("--pred", ev_pred, "Predictions CSV (single column)")
      ->required();
  ev->add_option("--gold", ev_gold, "Gold CSV (single column)")->required();
  ev->add_option("--task", ev_task, "classification | regression | sequence");

  auto* dg = app.add_subcommand(
      "diagnose", "Compare learned annotator parameters with true profiles");
  std::string dg_checkpoint, dg_profiles, dg_out;
  dg->add_option("--checkpoint", dg_checkpoint, "checkpoint.json of a replica")
      ->required();
  dg->add_option("--profiles", dg_profiles, "profiles.json from simulate")
      ->required();
  dg->add_option("--out", dg_out, "Write the report here instead of stdout");

  auto* bn = app.add_subcommand(
      "bench", "Time the serial and OpenMP kernel builds on fixed inputs");
  std::uint64_t bn_seed = 0;
  bn->add_option("--seed", bn_seed, "Input seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return e.get_exit_code();
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_protocol, sim_seed, sim_out);
    if (tr->parsed()) {
      crowd::ExperimentConfig cfg;
      if (!tr_config.empty())
        cfg = crowd::ExperimentConfig::parse_file(tr_config);
      if (!tr_method.empty()) cfg.set("method", tr_method);
      if (!tr_task.empty()) cfg.set("task", tr_task);
      if (!tr_protocol.empty()) cfg.set("protocol", tr_protocol);
      if (!tr_seed.empty()) cfg.set("seed", tr_seed);
      if (!tr_replicas.empty()) cfg.set("replicas", tr_replicas);
      if (!tr_epochs.empty()) cfg.set("epochs", tr_epochs);
      for (const std::string& kv : tr_sets) {
        const std::size_t eq = kv.find('=');
        crowd::require(eq != std::string::npos, "--set expects key=value, got '",
                       kv, "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      return cmd_train(cfg, tr_out.empty() ? default_out_dir(cfg) : tr_out);
    }
    if (ag->parsed())
      return cmd_aggregate(ag_answers, ag_rule, ag_classes, ag_prior, ag_out,
                           ag_json);
    if (ev->parsed()) return cmd_evaluate(ev_pred, ev_gold, ev_task);
    if (dg->parsed()) return cmd_diagnose(dg_checkpoint, dg_profiles, dg_out);
    if (bn->parsed()) {
      std::cout << crowd::bench_table(crowd::run_kernel_bench(bn_seed));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
