#include "crowd/em_crowd.hpp"

#include <cmath>
#include <vector>

#include "crowd/aggregation.hpp"
#include "crowd/kernels.hpp"
#include "crowd/rng.hpp"
#include "crowd/simulate.hpp"
#include "doctest.h"

using crowd::AnnotationTable;
using crowd::Tensor;

namespace {

Tensor prob_rows(std::size_t n, std::size_t c, std::uint64_t seed) {
  crowd::Rng rng(seed);
  Tensor logits = Tensor::matrix(n, c);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal();
  Tensor out = Tensor::zeros(logits.shape);
  crowd::kernels::softmax_rows(logits.data.data(), out.data.data(), n, c);
  return out;
}

AnnotationTable random_table(std::size_t n, std::size_t r, std::size_t c,
                             std::uint64_t seed) {
  crowd::Rng rng(seed);
  AnnotationTable t = AnnotationTable::classification(n, r, c);
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t a = 0; a < r; ++a) {
      if (rng.uniform() < 0.75) {
        t.set_label(i, a, static_cast<int>(rng.next_u64() % c));
        any = true;
      }
    }
    if (!any) t.set_label(i, 0, static_cast<int>(rng.next_u64() % c));
  }
  return t;
}

}  // namespace

TEST_CASE("e-step posterior matches the hand calculation") {
  Tensor p = Tensor::matrix(1, 2, {0.6, 0.4});
  AnnotationTable t = AnnotationTable::classification(1, 1, 2);
  t.set_label(0, 0, 0);
  std::vector<Tensor> pi = {Tensor::matrix(2, 2, {0.8, 0.2, 0.3, 0.7})};
  const Tensor q = crowd::e_step_classification(p, t, pi);
  // q proportional to (0.6*0.8, 0.4*0.3) = (0.48, 0.12).
  CHECK(q.at(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(q.at(0, 1) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("missing answers leave the posterior at the network belief") {
  Tensor p = prob_rows(4, 3, 1);
  AnnotationTable t = AnnotationTable::classification(4, 2, 3);
  t.set_label(1, 0, 2);  // rows 0, 2, 3 carry no answers at all
  std::vector<Tensor> pi = {
      Tensor::matrix(3, 3, {0.8, 0.1, 0.1, 0.2, 0.6, 0.2, 0.1, 0.1, 0.8}),
      Tensor::matrix(3, 3, {0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.2, 0.2, 0.6})};
  const Tensor q = crowd::e_step_classification(p, t, pi);
  for (const std::size_t i : {std::size_t(0), std::size_t(2), std::size_t(3)})
    for (std::size_t k = 0; k < 3; ++k)
      REQUIRE(q.at(i, k) == doctest::Approx(p.at(i, k)).epsilon(1e-15));
  CHECK(q.at(1, 2) > p.at(1, 2));  // the answer pulls belief toward class 2
}

TEST_CASE("underflowed posterior rows are floored and counted") {
  Tensor p = Tensor::matrix(1, 2, {0.5, 0.5});
  AnnotationTable t = AnnotationTable::classification(1, 1, 2);
  t.set_label(0, 0, 0);
  // Both classes give the observed answer probability zero.
  std::vector<Tensor> pi = {Tensor::matrix(2, 2, {0.0, 1.0, 0.0, 1.0})};
  crowd::EmStepStats stats;
  const Tensor q = crowd::e_step_classification(p, t, pi, &stats);
  CHECK(stats.floored_items == 1);
  CHECK(q.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("confusion m-step produces the posterior-weighted MAP counts") {
  // Two items, one annotator: answers 1 then 0; posteriors below.
  Tensor q = Tensor::matrix(2, 2, {1.0, 0.0, 0.5, 0.5});
  AnnotationTable t = AnnotationTable::classification(2, 1, 2);
  t.set_label(0, 0, 1);
  t.set_label(1, 0, 0);
  const auto pis = crowd::m_step_confusions(q, t, 1.0);
  REQUIRE(pis.size() == 1);
  // Row 0 counts: label0 gets 0.5 + 1, label1 gets 1.0 + 1; normalizer 3.5.
  CHECK(pis[0].at(0, 0) == doctest::Approx(1.5 / 3.5).epsilon(1e-15));
  CHECK(pis[0].at(0, 1) == doctest::Approx(2.0 / 3.5).epsilon(1e-15));
  // Row 1 counts: label0 gets 0.5 + 1, label1 gets 0 + 1; normalizer 2.5.
  CHECK(pis[0].at(1, 0) == doctest::Approx(1.5 / 2.5).epsilon(1e-15));
  CHECK(pis[0].at(1, 1) == doctest::Approx(1.0 / 2.5).epsilon(1e-15));
}

TEST_CASE("annotators with no answers fall back to uniform confusion rows") {
  Tensor q = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
  AnnotationTable t = AnnotationTable::classification(2, 2, 3);
  t.set_label(0, 0, 0);
  t.set_label(1, 0, 1);
  for (const double ps : {0.0, 2.0}) {
    const auto pis = crowd::m_step_confusions(q, t, ps);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t l = 0; l < 3; ++l)
        CHECK(pis[1].at(k, l) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("sequence e-step equals the flat e-step token for token") {
  const std::size_t n = 12, c = 3;
  Tensor p = prob_rows(n, c, 2);
  AnnotationTable t = random_table(n, 2, c, 3);
  std::vector<Tensor> pi = crowd::m_step_confusions(prob_rows(n, c, 4), t, 1.0);
  const Tensor flat = crowd::e_step_classification(p, t, pi);

  for (const std::vector<std::size_t>& lens :
       {std::vector<std::size_t>(n, 1),
        std::vector<std::size_t>{3, 4, 5}}) {
    const Tensor seq = crowd::e_step_sequence(p, t, lens, pi);
    REQUIRE(seq.size() == flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) REQUIRE(seq[i] == flat[i]);
  }
}

TEST_CASE("em objective matches the hand computation") {
  Tensor p = Tensor::matrix(2, 2, {0.6, 0.4, 0.3, 0.7});
  AnnotationTable t = AnnotationTable::classification(2, 1, 2);
  t.set_label(0, 0, 0);
  std::vector<Tensor> pi = {Tensor::matrix(2, 2, {0.8, 0.2, 0.3, 0.7})};
  // Item 0: log(0.6*0.8 + 0.4*0.3); item 1 has no answers: log(1).
  const double expect0 = std::log(0.6 * 0.8 + 0.4 * 0.3);
  CHECK(crowd::em_objective(p, t, pi, 0.0) ==
        doctest::Approx(expect0).epsilon(1e-15));
  const double prior = 2.0 * (std::log(0.8) + std::log(0.2) + std::log(0.3) +
                              std::log(0.7));
  CHECK(crowd::em_objective(p, t, pi, 2.0) ==
        doctest::Approx(expect0 + prior).epsilon(1e-12));
}

TEST_CASE("alternating e and m steps never decreases the objective") {
  // The network stays frozen, so each round is coordinate ascent on the
  // shared objective and must climb it monotonically.
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30, r = 4, c = 3;
    const Tensor p = prob_rows(n, c, 100 + trial);
    const AnnotationTable t = random_table(n, r, c, 200 + trial);
    const double ps = 1.0;
    Tensor q = crowd::vote_soft_counts(t);
    std::vector<Tensor> pi = crowd::m_step_confusions(q, t, ps);
    double prev = crowd::em_objective(p, t, pi, ps);
    for (int it = 0; it < 50; ++it) {
      q = crowd::e_step_classification(p, t, pi);
      pi = crowd::m_step_confusions(q, t, ps);
      const double obj = crowd::em_objective(p, t, pi, ps);
      REQUIRE(obj >= prev - 1e-8);
      prev = obj;
    }
  }
}

TEST_CASE("regression round matches its written contract") {
  AnnotationTable t = AnnotationTable::regression(3, 2);
  t.set_value(0, 0, 1.0);
  t.set_value(1, 0, 2.0);
  t.set_value(2, 0, 4.0);
  t.set_value(0, 1, 0.5);  // single answer keeps precision 1
  const std::vector<double> preds = {0.0, 1.0, 3.0};
  const std::vector<double> prev = {1.0, 1.0, 3.0};
  const auto round = crowd::regression_em_round(t, preds, prev);

  // Annotator 0 residuals: 0, 1, 1 -> variance 2/3.
  CHECK(round.precisions[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(round.precisions[1] == 1.0);

  // Item 0: (pred*1 + 1.5*1.0 + 1.0*0.5) / (1 + 1.5 + 1).
  CHECK(round.targets[0] == doctest::Approx((0.0 + 1.5 + 0.5) / 3.5));
  // Item 1 sees only annotator 0.
  CHECK(round.targets[1] == doctest::Approx((1.0 + 1.5 * 2.0) / 2.5));
  CHECK(round.targets[2] == doctest::Approx((3.0 + 1.5 * 4.0) / 2.5));
}

TEST_CASE("zero residuals hit the variance floor instead of exploding") {
  AnnotationTable t = AnnotationTable::regression(2, 1);
  t.set_value(0, 0, 1.0);
  t.set_value(1, 0, 2.0);
  const std::vector<double> preds = {1.0, 2.0};
  const auto round = crowd::regression_em_round(t, preds, {1.0, 2.0});
  CHECK(round.precisions[0] == doctest::Approx(1.0 / crowd::kVarianceFloor));
}

TEST_CASE("em state round-trips through json") {
  crowd::EmState s;
  s.posteriors = Tensor::matrix(2, 2, {0.9, 0.1, 0.25, 0.75});
  s.confusions = {Tensor::matrix(2, 2, {0.8, 0.2, 0.3, 0.7})};
  s.precisions = {1.5, 2.5};
  s.targets = {0.1, -0.2};
  s.epoch = 7;
  s.em_schedule = 3;
  const crowd::EmState back = crowd::EmState::from_json(s.to_json());
  CHECK(back.epoch == 7);
  CHECK(back.em_schedule == 3);
  REQUIRE(back.posteriors.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(back.posteriors[i] == s.posteriors[i]);
  REQUIRE(back.confusions.size() == 1);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(back.confusions[0][i] == s.confusions[0][i]);
  CHECK(back.precisions == s.precisions);
  CHECK(back.targets == s.targets);
}

TEST_CASE("m_step_network with zero steps is a no-op") {
  crowd::NetworkSpec spec;
  spec.input_dim = 2;
  spec.hidden = {4};
  spec.output_dim = 2;
  spec.softmax_output = true;
  crowd::Graph net = crowd::build_network(spec, 31);
  crowd::Optimizer opt(crowd::OptimizerConfig{});
  const Tensor x = Tensor::matrix(2, 2, {0.1, 0.2, -0.3, 0.4});
  const Tensor q = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
  std::vector<double> before;
  for (auto& p : net.params())
    before.insert(before.end(), p.value->data.begin(), p.value->data.end());
  CHECK(crowd::m_step_network(net, opt, x, q, 0, 8, 1, 0) == 0.0);
  std::vector<double> after;
  for (auto& p : net.params())
    after.insert(after.end(), p.value->data.begin(), p.value->data.end());
  CHECK(before == after);
}

TEST_CASE("classification em training learns through noisy annotators") {
  crowd::TaskSpec ts = crowd::protocol("paper-binary");
  ts.n_train = 400;
  ts.n_test = 300;
  const auto exp = crowd::generate_experiment(ts, 9);
  crowd::NetworkSpec spec;
  spec.input_dim = ts.dim;
  spec.hidden = {16};
  spec.output_dim = 2;
  spec.softmax_output = true;
  crowd::TrainOptions opts;
  opts.epochs = 20;
  opts.batch_size = 32;
  opts.optimizer.kind = crowd::OptimizerKind::adam;
  opts.optimizer.learning_rate = 1e-2;
  opts.seed = 9;
  const auto res = crowd::train_em_classification(spec, exp.train.data, 1, 1.0,
                                                  opts, &exp.test);
  REQUIRE(res.log.size() == 20);
  for (const auto& e : res.log) {
    CHECK(e.has_objective);
    CHECK(e.has_metric);
  }
  CHECK(res.log.back().metric > 60.0);
  CHECK(res.state.confusions.size() == 5);
  CHECK(res.state.posteriors.rows() == 400);
  // Later objectives sit above the starting one even though the network
  // moves between rounds.
  CHECK(res.log.back().objective > res.log.front().objective);
}

TEST_CASE("sequence em is the flat classification em on tokens") {
  crowd::TaskSpec ts = crowd::protocol("paper-sequence");
  ts.n_train = 60;
  ts.n_test = 40;
  const auto exp = crowd::generate_experiment(ts, 10);

  crowd::Dataset flat = exp.train.data;
  flat.kind = crowd::TaskKind::classification;
  flat.sentence_lengths.clear();

  crowd::NetworkSpec spec;
  spec.input_dim = ts.dim;
  spec.hidden = {8};
  spec.output_dim = exp.train.data.answers.num_classes();
  spec.softmax_output = true;
  crowd::TrainOptions opts;
  opts.epochs = 4;
  opts.batch_size = 32;
  opts.seed = 10;

  auto seq = crowd::train_em_sequence(spec, exp.train.data, 1, 1.0, opts);
  auto cls = crowd::train_em_classification(spec, flat, 1, 1.0, opts);
  REQUIRE(seq.log.size() == cls.log.size());
  for (std::size_t e = 0; e < seq.log.size(); ++e) {
    REQUIRE(seq.log[e].loss == cls.log[e].loss);
    REQUIRE(seq.log[e].objective == cls.log[e].objective);
  }
  auto ps = seq.network.params();
  auto pc = cls.network.params();
  REQUIRE(ps.size() == pc.size());
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (std::size_t i = 0; i < ps[k].value->size(); ++i)
      REQUIRE(ps[k].value->data[i] == pc[k].value->data[i]);
}

TEST_CASE("regression em training tracks biased annotators") {
  crowd::TaskSpec ts = crowd::protocol("paper-regression");
  ts.n_train = 300;
  ts.n_test = 200;
  const auto exp = crowd::generate_experiment(ts, 11);
  crowd::NetworkSpec spec;
  spec.input_dim = ts.dim;
  spec.hidden = {16};
  spec.output_dim = 1;
  spec.softmax_output = false;
  crowd::TrainOptions opts;
  opts.epochs = 25;
  opts.batch_size = 32;
  opts.optimizer.kind = crowd::OptimizerKind::adam;
  opts.optimizer.learning_rate = 1e-2;
  opts.seed = 11;
  const auto res = crowd::train_em_regression(spec, exp.train.data, opts,
                                              &exp.test);
  REQUIRE(res.log.size() == 25);
  CHECK(res.state.precisions.size() == exp.train.profiles.size());
  CHECK(res.state.targets.size() == 300);
  for (const double p : res.state.precisions) CHECK(p > 0.0);
  // Precision tracks the total residual scale, bias included: the annotator
  // with the smallest bias^2 + sd^2 should outweigh the largest.
  double best_err = 1e18, worst_err = -1e18;
  std::size_t best = 0, worst = 0;
  for (std::size_t r = 0; r < exp.train.profiles.size(); ++r) {
    const auto& prof = exp.train.profiles[r];
    const double err = prof.bias * prof.bias + prof.noise_sd * prof.noise_sd;
    if (err < best_err) { best_err = err; best = r; }
    if (err > worst_err) { worst_err = err; worst = r; }
  }
  CHECK(res.state.precisions[best] > res.state.precisions[worst]);
}
