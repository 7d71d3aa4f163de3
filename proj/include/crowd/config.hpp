#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowd/dataset.hpp"
#include "crowd/optim.hpp"

namespace crowd {

enum class Method {
  mv,
  ds,
  mean,
  em,
  dn,
  wdn,
  cl_vw,
  cl_vwb,
  cl_mw,
  cl_s,
  cl_b,
  cl_sb,
  true_labels,
};

Method method_from_string(const std::string& s);
std::string to_string(Method m);

// One experiment: a task, a method, a data source (either file paths or a
// named simulation protocol), and the training budget. Parsed from a flat
// key=value file; see config_keys() for the accepted keys.
struct ExperimentConfig {
  TaskKind task = TaskKind::classification;
  Method method = Method::mv;

  std::string protocol;  // simulation preset; empty means file paths
  std::string features, answers, gold;
  std::string test_features, test_gold;
  std::size_t num_classes = 0;  // 0 infers from the answers

  std::vector<std::size_t> hidden = {32};
  double dropout = 0.5;
  OptimizerConfig optimizer;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::size_t replicas = 10;

  std::size_t em_schedule = 1;
  double prior_strength = 1.0;
  std::string ds_labels = "hard";  // hard | soft posture of DS targets
  double crowd_learning_rate = 0.0;  // 0 shares the network rate
  double crowd_l2 = 0.0;             // pull toward the identity mapping

  // Rejects unknown keys (naming them), then validates.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);
  // Applies one key=value pair; unknown key is an error naming it.
  void set(const std::string& key, const std::string& value);
  // Cross-field checks: method/task compatibility, data source given, knobs
  // in range.
  void validate() const;
};

std::vector<std::string> config_keys();

// Methods that fit each task kind.
bool method_supports_task(Method m, TaskKind task);

}  // namespace crowd
