#pragma once

#include <string>
#include <vector>

#include "crowd/annotations.hpp"
#include "crowd/tensor.hpp"

namespace crowd {

enum class TaskKind { classification, regression, sequence };

TaskKind task_kind_from_string(const std::string& s);
std::string to_string(TaskKind kind);

// A loaded task. Sequence tasks are stored token-flat: features and answers
// have one row per token and sentence_lengths records the sentence structure.
struct Dataset {
  TaskKind kind = TaskKind::classification;
  Tensor features;  // N x D
  AnnotationTable answers;
  bool has_gold = false;
  std::vector<int> gold_labels;     // classification / sequence
  std::vector<double> gold_values;  // regression
  std::vector<std::size_t> sentence_lengths;  // sequence only; sums to N

  std::size_t num_items() const { return features.rows(); }
  std::size_t num_classes() const { return answers.num_classes(); }
};

// File formats:
//   features: CSV with a header row, one item (or token) per row.
//   answers:  CSV without a header, one column per annotator; missing cells
//             are empty, classification also accepts -1.
//   gold:     single unheaded column; pass an empty path when unavailable.
// Sequence files separate sentences with one blank line in every file.
// num_classes 0 infers the class count from the largest label seen.
Dataset load_dataset(const std::string& features_path,
                     const std::string& answers_path,
                     const std::string& gold_path, TaskKind kind,
                     std::size_t num_classes = 0);

// Reads an answers CSV on its own, for aggregation without features.
AnnotationTable load_answers(const std::string& path, TaskKind kind,
                             std::size_t num_classes = 0);

// Inverse of load_dataset; empty gold_path skips the gold file. Values are
// written with round-trip precision.
void save_dataset(const Dataset& ds, const std::string& features_path,
                  const std::string& answers_path,
                  const std::string& gold_path);

}  // namespace crowd
