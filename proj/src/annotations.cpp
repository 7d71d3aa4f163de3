#include "crowd/annotations.hpp"

#include <cmath>

#include "crowd/util.hpp"

namespace crowd {

AnnotationTable AnnotationTable::classification(std::size_t num_items,
                                                std::size_t num_annotators,
                                                std::size_t num_classes) {
  require(num_annotators > 0, "annotation table needs at least one annotator");
  require(num_classes >= 1, "annotation table needs at least one class");
  AnnotationTable t;
  t.kind_ = Kind::classification;
  t.num_items_ = num_items;
  t.num_annotators_ = num_annotators;
  t.num_classes_ = num_classes;
  t.values_.assign(num_items * num_annotators, 0.0);
  t.present_.assign(num_items * num_annotators, 0);
  return t;
}

AnnotationTable AnnotationTable::regression(std::size_t num_items,
                                            std::size_t num_annotators) {
  require(num_annotators > 0, "annotation table needs at least one annotator");
  AnnotationTable t;
  t.kind_ = Kind::regression;
  t.num_items_ = num_items;
  t.num_annotators_ = num_annotators;
  t.num_classes_ = 0;
  t.values_.assign(num_items * num_annotators, 0.0);
  t.present_.assign(num_items * num_annotators, 0);
  return t;
}

std::size_t AnnotationTable::cell(std::size_t item,
                                  std::size_t annotator) const {
  require(item < num_items_, "annotation table: item ", item, " out of ",
          num_items_);
  require(annotator < num_annotators_, "annotation table: annotator ",
          annotator, " out of ", num_annotators_);
  return item * num_annotators_ + annotator;
}

bool AnnotationTable::present(std::size_t item, std::size_t annotator) const {
  return present_[cell(item, annotator)] != 0;
}

int AnnotationTable::label(std::size_t item, std::size_t annotator) const {
  require(is_classification(), "annotation table: label() on a regression table");
  const std::size_t c = cell(item, annotator);
  require(present_[c] != 0, "annotation table: cell (", item, ", ", annotator,
          ") is missing");
  return static_cast<int>(values_[c]);
}

double AnnotationTable::value(std::size_t item, std::size_t annotator) const {
  require(!is_classification(),
          "annotation table: value() on a classification table");
  const std::size_t c = cell(item, annotator);
  require(present_[c] != 0, "annotation table: cell (", item, ", ", annotator,
          ") is missing");
  return values_[c];
}

void AnnotationTable::set_label(std::size_t item, std::size_t annotator,
                                int label) {
  require(is_classification(),
          "annotation table: set_label() on a regression table");
  require(label >= 0 && static_cast<std::size_t>(label) < num_classes_,
          "annotation table: label ", label, " out of range [0, ",
          num_classes_, ")");
  const std::size_t c = cell(item, annotator);
  values_[c] = static_cast<double>(label);
  present_[c] = 1;
}

void AnnotationTable::set_value(std::size_t item, std::size_t annotator,
                                double value) {
  require(!is_classification(),
          "annotation table: set_value() on a classification table");
  require(std::isfinite(value), "annotation table: non-finite value at (",
          item, ", ", annotator, ")");
  const std::size_t c = cell(item, annotator);
  values_[c] = value;
  present_[c] = 1;
}

void AnnotationTable::set_missing(std::size_t item, std::size_t annotator) {
  present_[cell(item, annotator)] = 0;
}

void AnnotationTable::poke_cell(std::size_t item, std::size_t annotator,
                                double raw) {
  values_[cell(item, annotator)] = raw;
}

std::size_t AnnotationTable::answers_for_item(std::size_t item) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < num_annotators_; ++r)
    if (present_[cell(item, r)] != 0) ++n;
  return n;
}

std::size_t AnnotationTable::answers_for_annotator(
    std::size_t annotator) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < num_items_; ++i)
    if (present_[cell(i, annotator)] != 0) ++n;
  return n;
}

std::size_t AnnotationTable::total_answers() const {
  std::size_t n = 0;
  for (std::uint8_t p : present_) n += p;
  return n;
}

void AnnotationTable::validate(const std::string& what) const {
  for (std::size_t i = 0; i < num_items_; ++i) {
    std::size_t answers = 0;
    for (std::size_t r = 0; r < num_annotators_; ++r) {
      const std::size_t c = i * num_annotators_ + r;
      if (present_[c] == 0) continue;
      ++answers;
      const double v = values_[c];
      require(std::isfinite(v), what, ": non-finite answer at item ", i,
              ", annotator ", r);
      if (is_classification()) {
        require(v == std::floor(v) && v >= 0.0 &&
                    v < static_cast<double>(num_classes_),
                what, ": label ", v, " at item ", i, ", annotator ", r,
                " out of range [0, ", num_classes_, ")");
      }
    }
    require(answers >= 1, what, ": item ", i, " has no answers");
  }
}

AnnotationTable AnnotationTable::rows(
    const std::vector<std::size_t>& items) const {
  AnnotationTable t;
  t.kind_ = kind_;
  t.num_items_ = items.size();
  t.num_annotators_ = num_annotators_;
  t.num_classes_ = num_classes_;
  t.values_.reserve(items.size() * num_annotators_);
  t.present_.reserve(items.size() * num_annotators_);
  for (std::size_t item : items) {
    require(item < num_items_, "annotation table: row ", item, " out of ",
            num_items_);
    for (std::size_t r = 0; r < num_annotators_; ++r) {
      const std::size_t c = item * num_annotators_ + r;
      t.values_.push_back(values_[c]);
      t.present_.push_back(present_[c]);
    }
  }
  return t;
}

}  // namespace crowd
