#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crowd/config.hpp"
#include "crowd/dataset.hpp"
#include "crowd/simulate.hpp"
#include "crowd/trainer.hpp"

#include "json.hpp"

namespace crowd {

// Seed for replica k of a run; every source of randomness in the replica
// derives from it.
std::uint64_t replica_seed(std::uint64_t base, std::size_t k);

struct ReplicaOutcome {
  std::size_t replica = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when !ok
  // Held-out metrics in report order; empty when no gold test set exists.
  std::vector<std::pair<std::string, double>> metrics;
  TrainLog log;
  nlohmann::json checkpoint;  // method-specific blobs; see README
  nlohmann::json recovery;    // null unless simulator profiles were at hand
  double seconds = 0.0;       // wall clock; reported only in timing_json
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicaOutcome> replicas;
  bool partial = false;  // at least one replica failed
};

// Runs config.replicas replicas sequentially. Simulation protocols
// regenerate data per replica seed; file datasets are shared across
// replicas. A replica failure is recorded, not fatal.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Named held-out metrics. Classification: accuracy. Sequence adds
// token-level precision/recall/F1 over non-background classes. Regression:
// MAE, RMSE, R-squared (x100).
std::vector<std::pair<std::string, double>> evaluate_labels(
    const std::vector<int>& pred, const Dataset& gold_set);
std::vector<std::pair<std::string, double>> evaluate_values(
    const std::vector<double>& pred, const Dataset& gold_set);

// Learned annotator parameters against the simulator's profiles. Dispatches
// on the checkpoint blobs written by run_experiment; fails when the
// checkpoint has no annotator parameters or the profile count mismatches.
nlohmann::json diagnose_recovery(const nlohmann::json& checkpoint,
                                 const std::vector<AnnotatorProfile>& profiles);
bool checkpoint_has_annotator_params(const nlohmann::json& checkpoint);

// Deterministic given config and seed: excludes all wall-clock data.
nlohmann::json metrics_json(const ExperimentResult& result);
// Wall clock per replica; never part of the determinism contract.
nlohmann::json timing_json(const ExperimentResult& result);
// Per-replica recovery reports plus a summary; null when none exist.
nlohmann::json recovery_json(const ExperimentResult& result);

// Writes metrics.json, timing.json, recovery.json (when present), and
// replica_<k>/{train.log, checkpoint.json} under out_dir.
void write_experiment(const ExperimentResult& result,
                      const std::string& out_dir);

// $CROWD_OUT_ROOT when set, else "out".
std::string output_root();

}  // namespace crowd
