#include "crowd/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "crowd/graph.hpp"
#include "crowd/rng.hpp"
#include "crowd/serialize.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

// Sub-seed tags for the stages of generate_experiment.
constexpr std::uint64_t kSeedProfiles = 101;
constexpr std::uint64_t kSeedTrainTask = 102;
constexpr std::uint64_t kSeedAnnotations = 103;
constexpr std::uint64_t kSeedTestTask = 104;

// Signed basis direction c: +e_0..+e_{d-1}, then -e_0..-e_{d-1}.
void write_mean(std::size_t c, std::size_t d, double separation,
                std::vector<double>& mean) {
  mean.assign(d, 0.0);
  mean[c % d] = (c < d ? separation : -separation);
}

Tensor diag_confusion(std::size_t c, double diag) {
  require(c >= 2, "diag_confusion: need at least 2 classes");
  const double off = (1.0 - diag) / static_cast<double>(c - 1);
  Tensor m = Tensor::matrix(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) m.at(i, j) = (i == j ? diag : off);
  return m;
}

std::vector<double> confusion_row(const Tensor& confusion, std::size_t row) {
  std::vector<double> out(confusion.cols());
  for (std::size_t j = 0; j < confusion.cols(); ++j)
    out[j] = confusion.at(row, j);
  return out;
}

// Shared fill loop: draw an answer per cell, thin by coverage, then resample
// one answer for any item left empty.
template <typename DrawFn, typename SetFn>
void fill_answers(std::size_t n, const std::vector<AnnotatorProfile>& profiles,
                  Rng& rng, std::size_t* resampled_items, DrawFn draw,
                  SetFn set, AnnotationTable& table) {
  const std::size_t r = profiles.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < r; ++a) {
      const auto answer = draw(i, a, rng);
      const bool dropped = rng.bernoulli(1.0 - profiles[a].coverage);
      if (!dropped) set(table, i, a, answer);
    }
  }
  std::size_t resampled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (table.answers_for_item(i) > 0) continue;
    const std::size_t a = rng.index(r);
    set(table, i, a, draw(i, a, rng));
    ++resampled;
  }
  if (resampled_items != nullptr) *resampled_items = resampled;
}

void check_profiles(const std::vector<AnnotatorProfile>& profiles,
                    AnnotatorProfile::Kind kind, const char* what) {
  require(!profiles.empty(), what, ": no annotator profiles");
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    require(profiles[a].kind == kind, what, ": annotator ", a,
            " has the wrong profile kind");
    profiles[a].validate(msg(what, ": annotator ", a));
  }
}

}  // namespace

AnnotatorProfile AnnotatorProfile::binary(double alpha, double beta,
                                          double coverage) {
  AnnotatorProfile p;
  p.kind = Kind::binary;
  p.alpha = alpha;
  p.beta = beta;
  p.coverage = coverage;
  return p;
}

AnnotatorProfile AnnotatorProfile::multiclass(Tensor confusion,
                                              double coverage) {
  AnnotatorProfile p;
  p.kind = Kind::confusion;
  p.confusion = std::move(confusion);
  p.coverage = coverage;
  return p;
}

AnnotatorProfile AnnotatorProfile::regression(double bias, double noise_sd,
                                              double coverage) {
  AnnotatorProfile p;
  p.kind = Kind::regression;
  p.bias = bias;
  p.noise_sd = noise_sd;
  p.coverage = coverage;
  return p;
}

void AnnotatorProfile::validate(const std::string& what) const {
  require(coverage > 0.0 && coverage <= 1.0, what, ": coverage ", coverage,
          " outside (0, 1]");
  switch (kind) {
    case Kind::binary:
      require(alpha >= 0.0 && alpha <= 1.0, what, ": sensitivity ", alpha,
              " outside [0, 1]");
      require(beta >= 0.0 && beta <= 1.0, what, ": specificity ", beta,
              " outside [0, 1]");
      break;
    case Kind::confusion: {
      require(confusion.ndim() == 2 && confusion.rows() == confusion.cols() &&
                  confusion.rows() >= 2,
              what, ": confusion matrix must be square, got ",
              shape_str(confusion.shape));
      for (std::size_t i = 0; i < confusion.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < confusion.cols(); ++j) {
          require(confusion.at(i, j) >= 0.0, what, ": negative confusion cell");
          s += confusion.at(i, j);
        }
        require(std::fabs(s - 1.0) <= 1e-9, what, ": confusion row ", i,
                " sums to ", s);
      }
      break;
    }
    case Kind::regression:
      require(std::isfinite(bias), what, ": non-finite bias");
      require(noise_sd >= 0.0, what, ": negative noise sd");
      break;
  }
}

nlohmann::json profiles_to_json(
    const std::vector<AnnotatorProfile>& profiles) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : profiles) {
    nlohmann::json j;
    j["coverage"] = p.coverage;
    switch (p.kind) {
      case AnnotatorProfile::Kind::binary:
        j["kind"] = "binary";
        j["alpha"] = p.alpha;
        j["beta"] = p.beta;
        break;
      case AnnotatorProfile::Kind::confusion:
        j["kind"] = "confusion";
        j["confusion"] = tensor_to_json(p.confusion);
        break;
      case AnnotatorProfile::Kind::regression:
        j["kind"] = "regression";
        j["bias"] = p.bias;
        j["noise_sd"] = p.noise_sd;
        break;
    }
    arr.push_back(j);
  }
  return nlohmann::json{{"annotators", arr}};
}

std::vector<AnnotatorProfile> profiles_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("annotators") &&
              j.at("annotators").is_array(),
          "profiles: expected an object with an annotators array");
  std::vector<AnnotatorProfile> out;
  for (const auto& e : j.at("annotators")) {
    const std::string kind = e.at("kind").get<std::string>();
    AnnotatorProfile p;
    if (kind == "binary") {
      p = AnnotatorProfile::binary(e.at("alpha").get<double>(),
                                   e.at("beta").get<double>());
    } else if (kind == "confusion") {
      p = AnnotatorProfile::multiclass(
          tensor_from_json(e.at("confusion"), "profiles: confusion"));
    } else if (kind == "regression") {
      p = AnnotatorProfile::regression(e.at("bias").get<double>(),
                                       e.at("noise_sd").get<double>());
    } else {
      fail("profiles: unknown annotator kind '", kind, "'");
    }
    if (e.contains("coverage")) p.coverage = e.at("coverage").get<double>();
    p.validate(msg("profiles: annotator ", out.size()));
    out.push_back(std::move(p));
  }
  require(!out.empty(), "profiles: empty annotator list");
  return out;
}

ClassificationTask gen_classification_task(std::size_t n, std::size_t d,
                                           std::size_t c, double separation,
                                           std::uint64_t seed) {
  require(n > 0 && d > 0 && c > 0, "gen_classification_task: n, d, c must be "
          "positive");
  require(c <= 2 * d, "gen_classification_task: ", c,
          " classes need dimension >= ", (c + 1) / 2, ", got ", d);
  require(separation > 0.0, "gen_classification_task: separation must be "
          "positive");
  Rng rng(seed);
  ClassificationTask task;
  task.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    task.labels[i] = static_cast<int>(i % c);
  rng.shuffle(task.labels);
  task.features = Tensor::matrix(n, d);
  std::vector<double> mean;
  for (std::size_t i = 0; i < n; ++i) {
    write_mean(static_cast<std::size_t>(task.labels[i]), d, separation, mean);
    for (std::size_t j = 0; j < d; ++j)
      task.features.at(i, j) = mean[j] + rng.normal();
  }
  return task;
}

RegressionTask gen_regression_task(std::size_t n, std::size_t d,
                                   double target_sd, std::uint64_t seed) {
  require(n > 1 && d > 0, "gen_regression_task: need n > 1 and d > 0");
  require(target_sd > 0.0, "gen_regression_task: target_sd must be positive");
  Rng rng(seed);
  RegressionTask task;
  task.features = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < task.features.size(); ++i)
    task.features[i] = rng.normal();

  NetworkSpec teacher_spec;
  teacher_spec.input_dim = d;
  teacher_spec.hidden = {16};
  teacher_spec.output_dim = 1;
  teacher_spec.softmax_output = false;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Graph teacher = build_mlp(teacher_spec, rng.next_u64());
    Tensor y = teacher.forward(task.features);
    double mean = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) mean += y[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      ss += (y[i] - mean) * (y[i] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd < 1e-6) continue;  // degenerate teacher (e.g. all units dead)
    task.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      task.values[i] = (y[i] - mean) / sd * target_sd;
    return task;
  }
  fail("gen_regression_task: no usable teacher network after 10 attempts");
}

SequenceTask gen_sequence_task(std::size_t n_tokens, std::size_t d,
                               std::size_t c, double separation,
                               double background_prob, std::size_t min_len,
                               std::size_t max_len, std::uint64_t seed) {
  require(n_tokens > 0 && d > 0 && c >= 2,
          "gen_sequence_task: need tokens, dimension, and >= 2 tags");
  require(c <= 2 * d, "gen_sequence_task: ", c, " tags need dimension >= ",
          (c + 1) / 2, ", got ", d);
  require(separation > 0.0, "gen_sequence_task: separation must be positive");
  require(background_prob > 0.0 && background_prob < 1.0,
          "gen_sequence_task: background_prob outside (0, 1)");
  require(min_len >= 1 && min_len <= max_len,
          "gen_sequence_task: bad sentence length range");
  Rng rng(seed);
  SequenceTask task;
  std::size_t total = 0;
  while (total < n_tokens) {
    const std::size_t len = min_len + rng.index(max_len - min_len + 1);
    task.sentence_lengths.push_back(len);
    total += len;
  }
  std::vector<double> tag_probs(c, (1.0 - background_prob) /
                                       static_cast<double>(c - 1));
  tag_probs[0] = background_prob;
  task.tags.resize(total);
  for (std::size_t i = 0; i < total; ++i)
    task.tags[i] = static_cast<int>(rng.discrete(tag_probs));
  task.features = Tensor::matrix(total, d);
  std::vector<double> mean;
  for (std::size_t i = 0; i < total; ++i) {
    write_mean(static_cast<std::size_t>(task.tags[i]), d, separation, mean);
    for (std::size_t j = 0; j < d; ++j)
      task.features.at(i, j) = mean[j] + rng.normal();
  }
  return task;
}

AnnotationTable simulate_binary_annotators(
    const std::vector<int>& labels,
    const std::vector<AnnotatorProfile>& profiles, std::uint64_t seed,
    std::size_t* resampled_items) {
  check_profiles(profiles, AnnotatorProfile::Kind::binary,
                 "simulate_binary_annotators");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] == 0 || labels[i] == 1,
            "simulate_binary_annotators: label ", labels[i], " at item ", i,
            " is not binary");
  Rng rng(seed);
  AnnotationTable table =
      AnnotationTable::classification(labels.size(), profiles.size(), 2);
  fill_answers(
      labels.size(), profiles, rng, resampled_items,
      [&](std::size_t i, std::size_t a, Rng& g) {
        if (labels[i] == 1) return g.bernoulli(profiles[a].alpha) ? 1 : 0;
        return g.bernoulli(profiles[a].beta) ? 0 : 1;
      },
      [](AnnotationTable& t, std::size_t i, std::size_t a, int v) {
        t.set_label(i, a, v);
      },
      table);
  return table;
}

AnnotationTable simulate_confusion_annotators(
    const std::vector<int>& labels,
    const std::vector<AnnotatorProfile>& profiles, std::uint64_t seed,
    std::size_t* resampled_items) {
  check_profiles(profiles, AnnotatorProfile::Kind::confusion,
                 "simulate_confusion_annotators");
  const std::size_t c = profiles[0].confusion.rows();
  for (const auto& p : profiles)
    require(p.confusion.rows() == c,
            "simulate_confusion_annotators: annotators disagree on the class "
            "count");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c,
            "simulate_confusion_annotators: label ", labels[i], " at item ",
            i, " out of range [0, ", c, ")");
  Rng rng(seed);
  AnnotationTable table =
      AnnotationTable::classification(labels.size(), profiles.size(), c);
  fill_answers(
      labels.size(), profiles, rng, resampled_items,
      [&](std::size_t i, std::size_t a, Rng& g) {
        return static_cast<int>(g.discrete(confusion_row(
            profiles[a].confusion, static_cast<std::size_t>(labels[i]))));
      },
      [](AnnotationTable& t, std::size_t i, std::size_t a, int v) {
        t.set_label(i, a, v);
      },
      table);
  return table;
}

AnnotationTable simulate_regression_annotators(
    const std::vector<double>& values,
    const std::vector<AnnotatorProfile>& profiles, std::uint64_t seed,
    std::size_t* resampled_items) {
  check_profiles(profiles, AnnotatorProfile::Kind::regression,
                 "simulate_regression_annotators");
  Rng rng(seed);
  AnnotationTable table =
      AnnotationTable::regression(values.size(), profiles.size());
  fill_answers(
      values.size(), profiles, rng, resampled_items,
      [&](std::size_t i, std::size_t a, Rng& g) {
        return values[i] + profiles[a].bias +
               g.normal(0.0, profiles[a].noise_sd);
      },
      [](AnnotationTable& t, std::size_t i, std::size_t a, double v) {
        t.set_value(i, a, v);
      },
      table);
  return table;
}

GeneratedExperiment generate_experiment(const TaskSpec& spec,
                                        std::uint64_t seed) {
  require(spec.n_train > 1 && spec.n_test > 0,
          "generate_experiment: need train and test sizes");
  GeneratedExperiment out;
  out.train.seed = seed;

  std::vector<AnnotatorProfile> profiles = spec.profiles;
  if (spec.draw_regression_annotators > 0) {
    require(spec.kind == TaskKind::regression,
            "generate_experiment: drawn annotator pools are regression-only");
    require(profiles.empty(),
            "generate_experiment: fixed profiles and a drawn pool are "
            "mutually exclusive");
    require(spec.bias_lo <= spec.bias_hi && spec.noise_lo <= spec.noise_hi &&
                spec.noise_lo >= 0.0,
            "generate_experiment: bad annotator draw ranges");
    Rng rng(mix64(seed, kSeedProfiles));
    for (std::size_t a = 0; a < spec.draw_regression_annotators; ++a) {
      const double bias = rng.uniform(spec.bias_lo, spec.bias_hi);
      const double noise = rng.uniform(spec.noise_lo, spec.noise_hi);
      profiles.push_back(AnnotatorProfile::regression(bias, noise));
    }
  }
  require(!profiles.empty(), "generate_experiment: no annotators configured");
  out.train.profiles = profiles;

  const std::uint64_t train_seed = mix64(seed, kSeedTrainTask);
  const std::uint64_t annot_seed = mix64(seed, kSeedAnnotations);
  const std::uint64_t test_seed = mix64(seed, kSeedTestTask);

  Dataset& train = out.train.data;
  Dataset& test = out.test;
  train.kind = spec.kind;
  test.kind = spec.kind;
  train.has_gold = true;
  test.has_gold = true;

  switch (spec.kind) {
    case TaskKind::classification: {
      auto tr = gen_classification_task(spec.n_train, spec.dim, spec.classes,
                                        spec.separation, train_seed);
      auto te = gen_classification_task(spec.n_test, spec.dim, spec.classes,
                                        spec.separation, test_seed);
      train.features = std::move(tr.features);
      train.gold_labels = tr.labels;
      test.features = std::move(te.features);
      test.gold_labels = std::move(te.labels);
      if (profiles[0].kind == AnnotatorProfile::Kind::binary) {
        require(spec.classes == 2,
                "generate_experiment: binary annotators need 2 classes");
        train.answers = simulate_binary_annotators(
            tr.labels, profiles, annot_seed, &out.train.resampled_items);
      } else {
        train.answers = simulate_confusion_annotators(
            tr.labels, profiles, annot_seed, &out.train.resampled_items);
        require(train.answers.num_classes() == spec.classes,
                "generate_experiment: confusion profiles disagree with the "
                "configured class count");
      }
      break;
    }
    case TaskKind::regression: {
      auto tr = gen_regression_task(spec.n_train, spec.dim, spec.target_sd,
                                    train_seed);
      auto te =
          gen_regression_task(spec.n_test, spec.dim, spec.target_sd,
                              test_seed);
      train.features = std::move(tr.features);
      train.gold_values = tr.values;
      test.features = std::move(te.features);
      test.gold_values = std::move(te.values);
      train.answers = simulate_regression_annotators(
          tr.values, profiles, annot_seed, &out.train.resampled_items);
      break;
    }
    case TaskKind::sequence: {
      auto tr = gen_sequence_task(spec.n_train, spec.dim, spec.classes,
                                  spec.separation, spec.background_prob,
                                  spec.min_sentence, spec.max_sentence,
                                  train_seed);
      auto te = gen_sequence_task(spec.n_test, spec.dim, spec.classes,
                                  spec.separation, spec.background_prob,
                                  spec.min_sentence, spec.max_sentence,
                                  test_seed);
      train.features = std::move(tr.features);
      train.gold_labels = tr.tags;
      train.sentence_lengths = std::move(tr.sentence_lengths);
      test.features = std::move(te.features);
      test.gold_labels = std::move(te.tags);
      test.sentence_lengths = std::move(te.sentence_lengths);
      train.answers = simulate_confusion_annotators(
          tr.tags, profiles, annot_seed, &out.train.resampled_items);
      require(train.answers.num_classes() == spec.classes,
              "generate_experiment: confusion profiles disagree with the "
              "configured tag count");
      break;
    }
  }
  train.answers.validate("generate_experiment");
  return out;
}

TaskSpec protocol(const std::string& name) {
  TaskSpec spec;
  if (name == "paper-binary") {
    spec.kind = TaskKind::classification;
    spec.classes = 2;
    spec.dim = 8;
    spec.separation = 1.0;
    spec.n_train = 2000;
    spec.n_test = 1000;
    const double alpha[5] = {0.6, 0.9, 0.5, 0.9, 0.9};
    const double beta[5] = {0.7, 0.8, 0.5, 0.2, 0.9};
    for (int a = 0; a < 5; ++a)
      spec.profiles.push_back(AnnotatorProfile::binary(alpha[a], beta[a]));
    return spec;
  }
  if (name == "paper-multiclass") {
    spec.kind = TaskKind::classification;
    spec.classes = 4;
    spec.dim = 8;
    spec.separation = 1.3;
    spec.n_train = 1500;
    spec.n_test = 1000;
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(4, 0.9)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(4, 0.75)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(4, 0.6)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(4, 0.4)));
    // Systematic flipper: answers class 3 when the truth is class 1.
    Tensor flip = diag_confusion(4, 0.85);
    flip.at(1, 0) = 0.05;
    flip.at(1, 1) = 0.1;
    flip.at(1, 2) = 0.05;
    flip.at(1, 3) = 0.8;
    spec.profiles.push_back(AnnotatorProfile::multiclass(std::move(flip)));
    return spec;
  }
  if (name == "paper-regression") {
    spec.kind = TaskKind::regression;
    spec.dim = 8;
    spec.n_train = 2000;
    spec.n_test = 1000;
    spec.target_sd = 2.0;
    spec.draw_regression_annotators = 10;
    spec.bias_lo = -3.0;
    spec.bias_hi = 3.0;
    spec.noise_lo = 0.2;
    spec.noise_hi = 1.0;
    return spec;
  }
  if (name == "paper-sequence") {
    spec.kind = TaskKind::sequence;
    spec.classes = 5;
    spec.dim = 8;
    spec.separation = 1.3;
    spec.n_train = 1500;
    spec.n_test = 1000;
    spec.background_prob = 0.4;
    spec.min_sentence = 3;
    spec.max_sentence = 8;
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(5, 0.9)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(5, 0.8)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(5, 0.45)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(5, 0.4)));
    spec.profiles.push_back(
        AnnotatorProfile::multiclass(diag_confusion(5, 0.35)));
    return spec;
  }
  fail("unknown protocol '", name, "' (expected one of: paper-binary, "
       "paper-multiclass, paper-regression, paper-sequence)");
}

std::vector<std::string> protocol_names() {
  return {"paper-binary", "paper-multiclass", "paper-regression",
          "paper-sequence"};
}

}  // namespace crowd
