#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowd/annotations.hpp"
#include "crowd/dataset.hpp"
#include "crowd/tensor.hpp"
#include "json.hpp"

namespace crowd {

// Ground-truth behavior of one simulated annotator. Binary annotators answer
// correctly with probability alpha on positives and beta on negatives;
// multiclass annotators draw from the confusion row of the true class;
// regression annotators add a fixed bias plus Gaussian noise. coverage is the
// probability that the annotator answers any given item at all.
struct AnnotatorProfile {
  enum class Kind { binary, confusion, regression };

  Kind kind = Kind::binary;
  double alpha = 0.0;
  double beta = 0.0;
  Tensor confusion;  // C x C, row-stochastic
  double bias = 0.0;
  double noise_sd = 0.0;
  double coverage = 1.0;

  static AnnotatorProfile binary(double alpha, double beta,
                                 double coverage = 1.0);
  static AnnotatorProfile multiclass(Tensor confusion, double coverage = 1.0);
  static AnnotatorProfile regression(double bias, double noise_sd,
                                     double coverage = 1.0);
  void validate(const std::string& what) const;
};

nlohmann::json profiles_to_json(const std::vector<AnnotatorProfile>& profiles);
std::vector<AnnotatorProfile> profiles_from_json(const nlohmann::json& j);

struct ClassificationTask {
  Tensor features;         // N x D
  std::vector<int> labels;  // length N
};

struct RegressionTask {
  Tensor features;            // N x D
  std::vector<double> values;  // length N
};

struct SequenceTask {
  Tensor features;   // tokens x D, sentence-flat
  std::vector<int> tags;
  std::vector<std::size_t> sentence_lengths;
};

// Balanced Gaussian clusters. Class c's mean sits at separation times a
// signed basis direction (+e_0..+e_{D-1}, then -e_0..), so task difficulty is
// set by separation alone; requires C <= 2D. Unit isotropic noise.
ClassificationTask gen_classification_task(std::size_t n, std::size_t d,
                                           std::size_t c, double separation,
                                           std::uint64_t seed);

// Standard-normal features pushed through a random one-hidden-layer teacher
// network, then standardized to mean 0 and the given sd.
RegressionTask gen_regression_task(std::size_t n, std::size_t d,
                                   double target_sd, std::uint64_t seed);

// Token tags drawn iid with background_prob mass on tag 0 and the rest split
// evenly; token features as in gen_classification_task over the tag set.
// Sentence lengths are uniform on [min_len, max_len]; generation stops at the
// first sentence boundary at or past n_tokens.
SequenceTask gen_sequence_task(std::size_t n_tokens, std::size_t d,
                               std::size_t c, double separation,
                               double background_prob, std::size_t min_len,
                               std::size_t max_len, std::uint64_t seed);

// Answer tables. Every item keeps at least one answer: items emptied by
// coverage thinning get one annotator resampled, counted in resampled_items.
AnnotationTable simulate_binary_annotators(
    const std::vector<int>& labels,
    const std::vector<AnnotatorProfile>& profiles, std::uint64_t seed,
    std::size_t* resampled_items = nullptr);
AnnotationTable simulate_confusion_annotators(
    const std::vector<int>& labels,
    const std::vector<AnnotatorProfile>& profiles, std::uint64_t seed,
    std::size_t* resampled_items = nullptr);
AnnotationTable simulate_regression_annotators(
    const std::vector<double>& values,
    const std::vector<AnnotatorProfile>& profiles, std::uint64_t seed,
    std::size_t* resampled_items = nullptr);

// A complete generation recipe: task shape plus annotator pool. Regression
// pools may be drawn per seed instead of fixed (draw_regression_annotators >
// 0 with the given ranges).
struct TaskSpec {
  TaskKind kind = TaskKind::classification;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t dim = 8;
  std::size_t classes = 2;
  double separation = 1.0;
  double target_sd = 2.0;  // regression truth scale
  std::vector<AnnotatorProfile> profiles;
  std::size_t draw_regression_annotators = 0;
  double bias_lo = -3.0, bias_hi = 3.0;
  double noise_lo = 0.2, noise_hi = 1.0;
  // sequence shape
  double background_prob = 0.4;
  std::size_t min_sentence = 3;
  std::size_t max_sentence = 8;
};

struct SyntheticDataset {
  Dataset data;  // answers plus gold
  std::vector<AnnotatorProfile> profiles;
  std::uint64_t seed = 0;
  std::size_t resampled_items = 0;
};

struct GeneratedExperiment {
  SyntheticDataset train;
  Dataset test;  // gold only; the answers table stays empty
};

// Deterministic per (spec, seed): profiles, train task, annotations, and test
// task each use a sub-seed derived from seed.
GeneratedExperiment generate_experiment(const TaskSpec& spec,
                                        std::uint64_t seed);

// Named presets for the bundled experiment protocols: paper-binary,
// paper-multiclass, paper-regression, paper-sequence.
TaskSpec protocol(const std::string& name);
std::vector<std::string> protocol_names();

}  // namespace crowd
