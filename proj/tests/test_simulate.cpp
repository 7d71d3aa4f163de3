#include "crowd/simulate.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"

using crowd::AnnotationTable;
using crowd::AnnotatorProfile;
using crowd::Tensor;

namespace {

// Convergence tolerance for the N = 10000 frequency checks.
constexpr double kLln = 0.03;

std::vector<int> alternating_labels(std::size_t n) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  return labels;
}

}  // namespace

TEST_CASE("binary annotator hits alpha on positives and beta on negatives") {
  const std::size_t n = 10000;
  const std::vector<int> labels = alternating_labels(n);
  const AnnotationTable t = crowd::simulate_binary_annotators(
      labels, {AnnotatorProfile::binary(0.8, 0.6)}, 17);
  std::size_t pos = 0, pos_right = 0, neg = 0, neg_right = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      ++pos;
      if (t.label(i, 0) == 1) ++pos_right;
    } else {
      ++neg;
      if (t.label(i, 0) == 0) ++neg_right;
    }
  }
  CHECK(std::fabs(double(pos_right) / double(pos) - 0.8) < kLln);
  CHECK(std::fabs(double(neg_right) / double(neg) - 0.6) < kLln);
}

TEST_CASE("confusion annotator draws from the true class row") {
  const std::size_t n = 10000;
  std::vector<int> labels(n, 1);  // all items in class 1
  Tensor conf = Tensor::matrix(3, 3, {0.8, 0.1, 0.1,
                                      0.2, 0.5, 0.3,
                                      0.1, 0.1, 0.8});
  const AnnotationTable t = crowd::simulate_confusion_annotators(
      labels, {AnnotatorProfile::multiclass(conf)}, 18);
  std::vector<double> freq(3, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    freq[static_cast<std::size_t>(t.label(i, 0))] += 1.0 / double(n);
  CHECK(std::fabs(freq[0] - 0.2) < kLln);
  CHECK(std::fabs(freq[1] - 0.5) < kLln);
  CHECK(std::fabs(freq[2] - 0.3) < kLln);
}

TEST_CASE("regression annotator applies bias plus gaussian noise") {
  const std::size_t n = 10000;
  std::vector<double> values(n, 2.0);
  const AnnotationTable t = crowd::simulate_regression_annotators(
      values, {AnnotatorProfile::regression(1.5, 0.5)}, 19);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += t.value(i, 0) / double(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = t.value(i, 0) - mean;
    var += d * d / double(n - 1);
  }
  CHECK(std::fabs(mean - 3.5) < kLln);
  CHECK(std::fabs(std::sqrt(var) - 0.5) < kLln);
}

TEST_CASE("coverage thins answers at the configured rate") {
  const std::size_t n = 10000;
  const std::vector<int> labels = alternating_labels(n);
  const AnnotationTable t = crowd::simulate_binary_annotators(
      labels,
      {AnnotatorProfile::binary(0.9, 0.9, 0.6),
       AnnotatorProfile::binary(0.9, 0.9, 1.0)},
      20);
  std::size_t answered = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (t.present(i, 0)) ++answered;
  CHECK(std::fabs(double(answered) / double(n) - 0.6) < kLln);
  for (std::size_t i = 0; i < n; ++i) CHECK(t.present(i, 1));
}

TEST_CASE("every item keeps at least one answer under aggressive thinning") {
  const std::size_t n = 500;
  const std::vector<int> labels = alternating_labels(n);
  std::size_t resampled = 0;
  const AnnotationTable t = crowd::simulate_binary_annotators(
      labels,
      {AnnotatorProfile::binary(0.9, 0.9, 0.05),
       AnnotatorProfile::binary(0.9, 0.9, 0.05)},
      21, &resampled);
  for (std::size_t i = 0; i < n; ++i) CHECK(t.answers_for_item(i) >= 1);
  CHECK(resampled > 0);  // 0.05^2 coverage would have emptied many items
}

TEST_CASE("simulation is deterministic in the seed") {
  const std::vector<int> labels = alternating_labels(200);
  const std::vector<AnnotatorProfile> profs = {
      AnnotatorProfile::binary(0.7, 0.8, 0.9)};
  const AnnotationTable a = crowd::simulate_binary_annotators(labels, profs, 5);
  const AnnotationTable b = crowd::simulate_binary_annotators(labels, profs, 5);
  const AnnotationTable c = crowd::simulate_binary_annotators(labels, profs, 6);
  bool differs = false;
  for (std::size_t i = 0; i < 200; ++i) {
    REQUIRE(a.present(i, 0) == b.present(i, 0));
    if (a.present(i, 0)) REQUIRE(a.label(i, 0) == b.label(i, 0));
    if (a.present(i, 0) != c.present(i, 0) ||
        (a.present(i, 0) && c.present(i, 0) && a.label(i, 0) != c.label(i, 0)))
      differs = true;
  }
  CHECK(differs);
}

TEST_CASE("classification task clusters sit at the configured separation") {
  const auto task = crowd::gen_classification_task(4000, 4, 2, 2.0, 33);
  REQUIRE(task.features.rows() == 4000);
  std::vector<double> mean0(4, 0.0), mean1(4, 0.0);
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < 4000; ++i) {
    if (task.labels[i] == 0) {
      ++n0;
      for (std::size_t j = 0; j < 4; ++j) mean0[j] += task.features.at(i, j);
    } else {
      ++n1;
      for (std::size_t j = 0; j < 4; ++j) mean1[j] += task.features.at(i, j);
    }
  }
  REQUIRE(n0 > 1000);
  REQUIRE(n1 > 1000);
  for (std::size_t j = 0; j < 4; ++j) {
    mean0[j] /= double(n0);
    mean1[j] /= double(n1);
  }
  // Class 0 centers on +2 e0, class 1 on +2 e1.
  CHECK(std::fabs(mean0[0] - 2.0) < 0.1);
  CHECK(std::fabs(mean0[1]) < 0.1);
  CHECK(std::fabs(mean1[1] - 2.0) < 0.1);
  CHECK(std::fabs(mean1[0]) < 0.1);
}

TEST_CASE("regression task is standardized to the target scale") {
  const auto task = crowd::gen_regression_task(5000, 6, 2.0, 34);
  double mean = 0.0;
  for (double v : task.values) mean += v / 5000.0;
  double var = 0.0;
  for (double v : task.values) var += (v - mean) * (v - mean) / 5000.0;
  CHECK(std::fabs(mean) < 1e-9);
  CHECK(std::fabs(std::sqrt(var) - 2.0) < 1e-9);
}

TEST_CASE("sequence task respects sentence bounds and background mass") {
  const auto task = crowd::gen_sequence_task(3000, 4, 5, 1.0, 0.4, 3, 8, 35);
  std::size_t total = 0;
  for (const std::size_t len : task.sentence_lengths) {
    CHECK(len >= 3);
    CHECK(len <= 8);
    total += len;
  }
  CHECK(total == task.tags.size());
  CHECK(total >= 3000);
  double bg = 0.0;
  for (const int tag : task.tags)
    if (tag == 0) bg += 1.0 / double(total);
  CHECK(std::fabs(bg - 0.4) < kLln);
}

TEST_CASE("generate_experiment is deterministic and splits train/test") {
  const crowd::TaskSpec spec = crowd::protocol("paper-binary");
  const auto a = crowd::generate_experiment(spec, 7);
  const auto b = crowd::generate_experiment(spec, 7);
  CHECK(a.train.data.num_items() == 2000);
  CHECK(a.test.num_items() == 1000);
  CHECK(a.train.data.has_gold);
  CHECK(a.test.has_gold);
  CHECK(a.test.answers.num_items() == 0);
  CHECK(a.train.profiles.size() == 5);
  for (std::size_t i = 0; i < a.train.data.features.size(); ++i)
    REQUIRE(a.train.data.features[i] == b.train.data.features[i]);
  for (std::size_t i = 0; i < a.train.data.num_items(); ++i)
    REQUIRE(a.train.data.gold_labels[i] == b.train.data.gold_labels[i]);
}

TEST_CASE("regression protocol draws fresh annotators per seed") {
  const crowd::TaskSpec spec = crowd::protocol("paper-regression");
  const auto a = crowd::generate_experiment(spec, 1);
  const auto b = crowd::generate_experiment(spec, 2);
  REQUIRE(a.train.profiles.size() == 10);
  REQUIRE(b.train.profiles.size() == 10);
  bool differs = false;
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(a.train.profiles[r].bias >= -3.0);
    CHECK(a.train.profiles[r].bias <= 3.0);
    if (a.train.profiles[r].bias != b.train.profiles[r].bias) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("profiles round-trip through json") {
  std::vector<AnnotatorProfile> profs;
  profs.push_back(AnnotatorProfile::binary(0.65, 0.85, 0.9));
  profs.push_back(AnnotatorProfile::multiclass(
      Tensor::matrix(2, 2, {0.9, 0.1, 0.3, 0.7})));
  profs.push_back(AnnotatorProfile::regression(-1.25, 0.5));
  const auto back = crowd::profiles_from_json(crowd::profiles_to_json(profs));
  REQUIRE(back.size() == 3);
  CHECK(back[0].alpha == 0.65);
  CHECK(back[0].coverage == 0.9);
  CHECK(back[1].confusion.at(1, 0) == 0.3);
  CHECK(back[2].bias == -1.25);
  CHECK(back[2].noise_sd == 0.5);
}

TEST_CASE("profile validation rejects out-of-range parameters") {
  CHECK_THROWS_AS(AnnotatorProfile::binary(1.2, 0.5).validate("p"),
                  crowd::Error);
  CHECK_THROWS_AS(AnnotatorProfile::binary(0.5, 0.5, 0.0).validate("p"),
                  crowd::Error);
  Tensor bad = Tensor::matrix(2, 2, {0.9, 0.2, 0.3, 0.7});
  CHECK_THROWS_AS(AnnotatorProfile::multiclass(bad).validate("p"),
                  crowd::Error);
  CHECK_THROWS_AS(AnnotatorProfile::regression(0.0, -1.0).validate("p"),
                  crowd::Error);
}

TEST_CASE("protocols are named and unknown names are rejected") {
  for (const std::string& name : crowd::protocol_names())
    CHECK_NOTHROW(crowd::protocol(name));
  CHECK_THROWS_AS(crowd::protocol("paper-unknown"), crowd::Error);
}
