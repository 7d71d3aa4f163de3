#include "crowd/bench.hpp"

#include <chrono>
#include <cstring>
#include <functional>
#include <sstream>

#include "crowd/kernels.hpp"
#include "crowd/rng.hpp"
#include "crowd/util.hpp"

namespace crowd {

namespace {

std::vector<double> random_buffer(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() * 0.5;
  return v;
}

// Best of a few repeats so one scheduler hiccup does not skew the table.
double time_ms(const std::function<void()>& fn) {
  constexpr int kRepeats = 3;
  double best = 0.0;
  for (int i = 0; i < kRepeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    if (i == 0 || ms < best) best = ms;
  }
  return best;
}

BenchResult bench_one(const std::string& op, std::size_t n, std::size_t k,
                      std::size_t m, std::size_t out_size,
                      const std::function<void(double*)>& serial,
                      const std::function<void(double*)>& openmp) {
  BenchResult r;
  r.op = op;
  r.n = n;
  r.k = k;
  r.m = m;
  std::vector<double> out_serial(out_size), out_openmp(out_size);
  r.serial_ms = time_ms([&] { serial(out_serial.data()); });
  r.openmp_ms = time_ms([&] { openmp(out_openmp.data()); });
  r.identical = std::memcmp(out_serial.data(), out_openmp.data(),
                            out_size * sizeof(double)) == 0;
  return r;
}

}  // namespace

std::vector<BenchResult> run_kernel_bench(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 256, k = 128, m = 96;
  const std::vector<double> a = random_buffer(n * k, rng);
  const std::vector<double> b = random_buffer(k * m, rng);
  const std::vector<double> bn = random_buffer(n * m, rng);
  const std::vector<double> bt = random_buffer(m * k, rng);
  const std::vector<double> flat = random_buffer(n * m, rng);

  std::vector<BenchResult> results;
  namespace kn = kernels;
  results.push_back(bench_one(
      "matmul", n, k, m, n * m,
      [&](double* c) { kn::serial::matmul(a.data(), b.data(), c, n, k, m); },
      [&](double* c) { kn::openmp::matmul(a.data(), b.data(), c, n, k, m); }));
  results.push_back(bench_one(
      "matmul_at", n, k, m, k * m,
      [&](double* c) {
        kn::serial::matmul_at(a.data(), bn.data(), c, n, k, m);
      },
      [&](double* c) {
        kn::openmp::matmul_at(a.data(), bn.data(), c, n, k, m);
      }));
  results.push_back(bench_one(
      "matmul_bt", n, k, m, n * m,
      [&](double* c) {
        kn::serial::matmul_bt(a.data(), bt.data(), c, n, k, m);
      },
      [&](double* c) {
        kn::openmp::matmul_bt(a.data(), bt.data(), c, n, k, m);
      }));
  results.push_back(bench_one(
      "softmax_rows", n, 0, m, n * m,
      [&](double* y) { kn::serial::softmax_rows(flat.data(), y, n, m); },
      [&](double* y) { kn::openmp::softmax_rows(flat.data(), y, n, m); }));
  results.push_back(bench_one(
      "relu", n * m, 0, 0, n * m,
      [&](double* y) { kn::serial::relu(flat.data(), y, n * m); },
      [&](double* y) { kn::openmp::relu(flat.data(), y, n * m); }));
  return results;
}

std::string bench_table(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  os << "kernel          n     k     m   serial_ms   openmp_ms  identical\n";
  for (const BenchResult& r : results) {
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%-12s %5zu %5zu %5zu %11.3f %11.3f  %s\n", r.op.c_str(),
                  r.n, r.k, r.m, r.serial_ms, r.openmp_ms,
                  r.identical ? "yes" : "NO");
    os << line;
  }
  os << (kernels::openmp_compiled()
             ? "openmp: compiled, " + std::to_string(kernels::openmp_threads())
                   + " threads\n"
             : "openmp: not compiled, openmp entry points run serially\n");
  return os.str();
}

}  // namespace crowd
