#include "crowd/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "crowd/util.hpp"

namespace crowd {

namespace {

constexpr double kTinyLog = 1e-300;

double safe_log(double x) { return std::log(std::max(x, kTinyLog)); }

// Refits the class prior and confusion matrices from posteriors by MAP
// counting with prior_strength pseudo-counts per cell.
void fit_parameters(const AnnotationTable& table, const Tensor& posteriors,
                    double prior_strength, Tensor& class_prior,
                    std::vector<Tensor>& confusions) {
  const std::size_t n = table.num_items();
  const std::size_t r = table.num_annotators();
  const std::size_t c = table.num_classes();

  class_prior = Tensor::zeros({c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) class_prior[k] += posteriors.at(i, k);
  double z = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    class_prior[k] += prior_strength;
    z += class_prior[k];
  }
  if (z <= 0.0) {
    class_prior = Tensor::full({c}, 1.0 / static_cast<double>(c));
  } else {
    for (std::size_t k = 0; k < c; ++k) class_prior[k] /= z;
  }

  confusions.assign(r, Tensor::zeros({c, c}));
  for (std::size_t a = 0; a < r; ++a) {
    Tensor& pi = confusions[a];
    for (std::size_t i = 0; i < n; ++i) {
      if (!table.present(i, a)) continue;
      const int l = table.label(i, a);
      for (std::size_t k = 0; k < c; ++k)
        pi.at(k, static_cast<std::size_t>(l)) += posteriors.at(i, k);
    }
    for (std::size_t k = 0; k < c; ++k) {
      double row = 0.0;
      for (std::size_t l = 0; l < c; ++l) {
        pi.at(k, l) += prior_strength;
        row += pi.at(k, l);
      }
      if (row <= 0.0) {
        for (std::size_t l = 0; l < c; ++l)
          pi.at(k, l) = 1.0 / static_cast<double>(c);
      } else {
        for (std::size_t l = 0; l < c; ++l) pi.at(k, l) /= row;
      }
    }
  }
}

// Posterior over true classes given current parameters. Missing answers
// contribute no factor.
Tensor compute_posteriors(const AnnotationTable& table,
                          const Tensor& class_prior,
                          const std::vector<Tensor>& confusions) {
  const std::size_t n = table.num_items();
  const std::size_t r = table.num_annotators();
  const std::size_t c = table.num_classes();
  Tensor q = Tensor::zeros({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      double p = class_prior[k];
      for (std::size_t a = 0; a < r; ++a) {
        if (!table.present(i, a)) continue;
        p *= confusions[a].at(k, static_cast<std::size_t>(table.label(i, a)));
      }
      q.at(i, k) = p;
      z += p;
    }
    if (z <= 0.0) {
      for (std::size_t k = 0; k < c; ++k)
        q.at(i, k) = 1.0 / static_cast<double>(c);
    } else {
      for (std::size_t k = 0; k < c; ++k) q.at(i, k) /= z;
    }
  }
  return q;
}

}  // namespace

std::vector<int> majority_vote(const AnnotationTable& table) {
  require(table.is_classification(),
          "majority_vote: requires a classification table");
  table.validate("majority_vote");
  const std::size_t c = table.num_classes();
  std::vector<int> out(table.num_items(), 0);
  std::vector<std::size_t> counts(c);
  for (std::size_t i = 0; i < table.num_items(); ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t a = 0; a < table.num_annotators(); ++a)
      if (table.present(i, a))
        ++counts[static_cast<std::size_t>(table.label(i, a))];
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (counts[k] > counts[best]) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<double> mean_answer(const AnnotationTable& table) {
  require(!table.is_classification(),
          "mean_answer: requires a regression table");
  table.validate("mean_answer");
  std::vector<double> out(table.num_items(), 0.0);
  for (std::size_t i = 0; i < table.num_items(); ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < table.num_annotators(); ++a) {
      if (!table.present(i, a)) continue;
      sum += table.value(i, a);
      ++count;
    }
    out[i] = sum / static_cast<double>(count);
  }
  return out;
}

Tensor vote_soft_counts(const AnnotationTable& table) {
  require(table.is_classification(),
          "vote_soft_counts: requires a classification table");
  table.validate("vote_soft_counts");
  const std::size_t c = table.num_classes();
  Tensor q = Tensor::zeros({table.num_items(), c});
  for (std::size_t i = 0; i < table.num_items(); ++i) {
    std::size_t count = 0;
    for (std::size_t a = 0; a < table.num_annotators(); ++a) {
      if (!table.present(i, a)) continue;
      q.at(i, static_cast<std::size_t>(table.label(i, a))) += 1.0;
      ++count;
    }
    for (std::size_t k = 0; k < c; ++k)
      q.at(i, k) /= static_cast<double>(count);
  }
  return q;
}

std::vector<int> hard_labels(const Tensor& posteriors) {
  require(posteriors.ndim() == 2, "hard_labels: expected a rank-2 tensor");
  std::vector<int> out(posteriors.rows(), 0);
  for (std::size_t i = 0; i < posteriors.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < posteriors.cols(); ++k)
      if (posteriors.at(i, k) > posteriors.at(i, best)) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

DawidSkeneResult dawid_skene(const AnnotationTable& table,
                             double prior_strength, std::size_t max_iters,
                             double tol) {
  require(table.is_classification(),
          "dawid_skene: requires a classification table");
  require(prior_strength >= 0.0,
          "dawid_skene: prior_strength must be nonnegative");
  table.validate("dawid_skene");

  DawidSkeneResult res;
  res.posteriors = vote_soft_counts(table);
  fit_parameters(table, res.posteriors, prior_strength, res.class_prior,
                 res.confusions);
  res.objective_trace.push_back(
      ds_objective(table, res.confusions, res.class_prior, prior_strength));

  for (std::size_t it = 0; it < max_iters; ++it) {
    Tensor q = compute_posteriors(table, res.class_prior, res.confusions);
    double delta = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      delta = std::max(delta, std::fabs(q[i] - res.posteriors[i]));
    res.posteriors = std::move(q);
    fit_parameters(table, res.posteriors, prior_strength, res.class_prior,
                   res.confusions);
    res.objective_trace.push_back(
        ds_objective(table, res.confusions, res.class_prior, prior_strength));
    res.iterations = it + 1;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double ds_objective(const AnnotationTable& table,
                    const std::vector<Tensor>& confusions,
                    const Tensor& class_prior, double prior_strength) {
  require(confusions.size() == table.num_annotators(),
          "ds_objective: expected ", table.num_annotators(),
          " confusion matrices, got ", confusions.size());
  const std::size_t n = table.num_items();
  const std::size_t c = table.num_classes();
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double marginal = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      double p = class_prior[k];
      for (std::size_t a = 0; a < table.num_annotators(); ++a) {
        if (!table.present(i, a)) continue;
        p *= confusions[a].at(k, static_cast<std::size_t>(table.label(i, a)));
      }
      marginal += p;
    }
    ll += safe_log(marginal);
  }
  if (prior_strength > 0.0) {
    for (std::size_t k = 0; k < c; ++k)
      ll += prior_strength * safe_log(class_prior[k]);
    for (const Tensor& pi : confusions)
      for (std::size_t i = 0; i < pi.size(); ++i)
        ll += prior_strength * safe_log(pi[i]);
  }
  return ll;
}

}  // namespace crowd
