#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace crowd {

// N x R table of crowd answers with an explicit missing mask. Classification
// tables hold class indices in [0, C); regression tables hold reals.
// set_missing only flips the mask: whatever value a cell held stays in
// storage, which lets tests assert that masked contents never leak into any
// computation.
class AnnotationTable {
 public:
  enum class Kind { classification, regression };

  // Empty table; usable only after assignment from a factory result.
  AnnotationTable() = default;

  static AnnotationTable classification(std::size_t num_items,
                                        std::size_t num_annotators,
                                        std::size_t num_classes);
  static AnnotationTable regression(std::size_t num_items,
                                    std::size_t num_annotators);

  Kind kind() const { return kind_; }
  bool is_classification() const { return kind_ == Kind::classification; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_annotators() const { return num_annotators_; }
  std::size_t num_classes() const { return num_classes_; }

  bool present(std::size_t item, std::size_t annotator) const;
  int label(std::size_t item, std::size_t annotator) const;
  double value(std::size_t item, std::size_t annotator) const;

  void set_label(std::size_t item, std::size_t annotator, int label);
  void set_value(std::size_t item, std::size_t annotator, double value);
  void set_missing(std::size_t item, std::size_t annotator);

  // Overwrites the stored content of a cell without touching the mask.
  void poke_cell(std::size_t item, std::size_t annotator, double raw);

  std::size_t answers_for_item(std::size_t item) const;
  std::size_t answers_for_annotator(std::size_t annotator) const;
  std::size_t total_answers() const;

  // Checks the table invariants: every item has at least one answer, class
  // labels are in range, regression values are finite.
  void validate(const std::string& what) const;

  // Row subset in the given order; used for mini-batching.
  AnnotationTable rows(const std::vector<std::size_t>& items) const;

 private:
  std::size_t cell(std::size_t item, std::size_t annotator) const;

  Kind kind_ = Kind::classification;
  std::size_t num_items_ = 0;
  std::size_t num_annotators_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> present_;
};

}  // namespace crowd
