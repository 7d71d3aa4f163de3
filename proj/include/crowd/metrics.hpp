#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace crowd {

// Percent scale: identical vectors give 100.
double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& gold);

double mean_absolute_error(const std::vector<double>& predictions,
                           const std::vector<double>& gold);
double root_mean_squared_error(const std::vector<double>& predictions,
                               const std::vector<double>& gold);
// 100 * (1 - SSE/SST); the gold values must not all be equal.
double r_squared(const std::vector<double>& predictions,
                 const std::vector<double>& gold);

struct TokenPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged precision/recall/F1 over tokens whose class is not the
// background class 0.
TokenPrf token_prf(const std::vector<int>& predictions,
                   const std::vector<int>& gold);

// Mean and unbiased standard deviation. sd is 0 when n < 2.
std::pair<double, double> mean_sd(const std::vector<double>& values);

// Pearson correlation; needs two or more points and variance in both
// coordinates.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace crowd
