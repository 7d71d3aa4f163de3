#include "crowd/metrics.hpp"

#include <cmath>

#include "crowd/util.hpp"

namespace crowd {

namespace {

template <typename T>
void check_aligned(const std::vector<T>& predictions,
                   const std::vector<T>& gold, const char* what) {
  require(!gold.empty(), what, ": empty gold labels");
  require(predictions.size() == gold.size(), what, ": ", predictions.size(),
          " predictions vs ", gold.size(), " gold labels");
}

}  // namespace

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& gold) {
  check_aligned(predictions, gold, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (predictions[i] == gold[i]) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
}

double mean_absolute_error(const std::vector<double>& predictions,
                           const std::vector<double>& gold) {
  check_aligned(predictions, gold, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    total += std::fabs(predictions[i] - gold[i]);
  return total / static_cast<double>(gold.size());
}

double root_mean_squared_error(const std::vector<double>& predictions,
                               const std::vector<double>& gold) {
  check_aligned(predictions, gold, "rmse");
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double d = predictions[i] - gold[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(gold.size()));
}

double r_squared(const std::vector<double>& predictions,
                 const std::vector<double>& gold) {
  check_aligned(predictions, gold, "r_squared");
  double mean = 0.0;
  for (double g : gold) mean += g;
  mean /= static_cast<double>(gold.size());
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double e = predictions[i] - gold[i];
    const double t = gold[i] - mean;
    sse += e * e;
    sst += t * t;
  }
  require(sst > 0.0, "r_squared: gold values are all equal");
  return 100.0 * (1.0 - sse / sst);
}

TokenPrf token_prf(const std::vector<int>& predictions,
                   const std::vector<int>& gold) {
  check_aligned(predictions, gold, "token_prf");
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool pred_fg = predictions[i] != 0;
    const bool gold_fg = gold[i] != 0;
    if (pred_fg && predictions[i] == gold[i]) {
      ++tp;
    } else {
      if (pred_fg) ++fp;
      if (gold_fg) ++fn;
    }
  }
  TokenPrf out;
  if (tp + fp > 0)
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0)
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (out.precision + out.recall > 0.0)
    out.f1 =
        2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

std::pair<double, double> mean_sd(const std::vector<double>& values) {
  require(!values.empty(), "mean_sd: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "pearson: ", a.size(), " vs ", b.size(),
          " points");
  require(a.size() >= 2, "pearson: need at least two points");
  const double ma = mean_sd(a).first;
  const double mb = mean_sd(b).first;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  require(saa > 0.0 && sbb > 0.0, "pearson: a coordinate has zero variance");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace crowd
