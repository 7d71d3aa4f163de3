#pragma once

#include <cstddef>
#include <vector>

#include "crowd/annotations.hpp"
#include "crowd/tensor.hpp"

namespace crowd {

// Per item, the most frequent answer; ties go to the lowest class index.
std::vector<int> majority_vote(const AnnotationTable& table);

// Per item, the arithmetic mean of the observed answers.
std::vector<double> mean_answer(const AnnotationTable& table);

// N x C matrix of fractional votes: row n holds the share of item n's
// answers naming each class. Rows sum to 1.
Tensor vote_soft_counts(const AnnotationTable& table);

// Argmax per posterior row; ties go to the lowest class index.
std::vector<int> hard_labels(const Tensor& posteriors);

struct DawidSkeneResult {
  Tensor posteriors;               // N x C
  std::vector<Tensor> confusions;  // per annotator, C x C row-stochastic
  Tensor class_prior;              // length C
  std::size_t iterations = 0;
  bool converged = false;
  // Objective value after the initial fit and after each iteration.
  std::vector<double> objective_trace;
};

// EM estimation of per-annotator confusion matrices and the class prior.
// Posteriors start from fractional votes; parameters are refit, then each
// iteration recomputes posteriors and refits. Dirichlet smoothing adds
// prior_strength to every confusion and prior count. Stops when the max
// absolute posterior change drops below tol.
DawidSkeneResult dawid_skene(const AnnotationTable& table,
                             double prior_strength = 1.0,
                             std::size_t max_iters = 100, double tol = 1e-6);

// Observed-data log-likelihood plus the smoothing log-prior for a parameter
// estimate. Non-decreasing over dawid_skene iterations.
double ds_objective(const AnnotationTable& table,
                    const std::vector<Tensor>& confusions,
                    const Tensor& class_prior, double prior_strength);

}  // namespace crowd
