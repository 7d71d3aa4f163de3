#include "crowd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crowd::kernels {

namespace {

Mode initial_mode() {
  const char* env = std::getenv("CROWD_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "serial") == 0) return Mode::serial;
    if (std::strcmp(env, "openmp") == 0) return Mode::openmp;
  }
#ifdef _OPENMP
  return Mode::openmp;
#else
  return Mode::serial;
#endif
}

Mode g_mode = initial_mode();

// Small problems are not worth the fork/join overhead.
constexpr std::size_t kParallelWorkMin = 4096;

}  // namespace

Mode active_mode() { return g_mode; }

void set_mode(Mode m) { g_mode = m; }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int openmp_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t n,
            std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    std::fill(ci, ci + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_at(const double* a, const double* b, double* c, std::size_t n,
               std::size_t k, std::size_t m) {
  // Output row p accumulates over samples i in fixed order.
  for (std::size_t p = 0; p < k; ++p) {
    double* cp = c + p * m;
    std::fill(cp, cp + m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double aip = a[i * k + p];
      const double* bi = b + i * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t n,
               std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * m;
    double* ci = c + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double* bj = b + j * m;
      double s = 0.0;
      for (std::size_t p = 0; p < m; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
}

void add_bias_rows(double* x, const double* bias, std::size_t n,
                   std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* xi = x + i * m;
    for (std::size_t j = 0; j < m; ++j) xi[j] += bias[j];
  }
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad(const double* x, const double* gy, double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

void softmax_rows(const double* x, double* y, std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * m;
    double* yi = y + i * m;
    double mx = xi[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, xi[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      z += yi[j];
    }
    for (std::size_t j = 0; j < m; ++j) yi[j] /= z;
  }
}

}  // namespace serial

namespace openmp {

// Each parallel loop runs over output rows; every row is written by exactly
// one thread with the same inner accumulation order as the serial kernel, so
// results match the serial build bit for bit.

void matmul(const double* a, const double* b, double* c, std::size_t n,
            std::size_t k, std::size_t m) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWorkMin)
#endif
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    std::fill(ci, ci + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_at(const double* a, const double* b, double* c, std::size_t n,
               std::size_t k, std::size_t m) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWorkMin)
#endif
  for (std::size_t p = 0; p < k; ++p) {
    double* cp = c + p * m;
    std::fill(cp, cp + m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double aip = a[i * k + p];
      const double* bi = b + i * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t n,
               std::size_t m, std::size_t k) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n * m * k >= kParallelWorkMin)
#endif
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * m;
    double* ci = c + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double* bj = b + j * m;
      double s = 0.0;
      for (std::size_t p = 0; p < m; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
}

void add_bias_rows(double* x, const double* bias, std::size_t n,
                   std::size_t m) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n * m >= kParallelWorkMin)
#endif
  for (std::size_t i = 0; i < n; ++i) {
    double* xi = x + i * m;
    for (std::size_t j = 0; j < m; ++j) xi[j] += bias[j];
  }
}

void relu(const double* x, double* y, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelWorkMin)
#endif
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad(const double* x, const double* gy, double* gx, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelWorkMin)
#endif
  for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

void softmax_rows(const double* x, double* y, std::size_t n, std::size_t m) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n * m >= kParallelWorkMin)
#endif
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * m;
    double* yi = y + i * m;
    double mx = xi[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, xi[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      z += yi[j];
    }
    for (std::size_t j = 0; j < m; ++j) yi[j] /= z;
  }
}

}  // namespace openmp

void matmul(const double* a, const double* b, double* c, std::size_t n,
            std::size_t k, std::size_t m) {
  if (g_mode == Mode::openmp)
    openmp::matmul(a, b, c, n, k, m);
  else
    serial::matmul(a, b, c, n, k, m);
}

void matmul_at(const double* a, const double* b, double* c, std::size_t n,
               std::size_t k, std::size_t m) {
  if (g_mode == Mode::openmp)
    openmp::matmul_at(a, b, c, n, k, m);
  else
    serial::matmul_at(a, b, c, n, k, m);
}

void matmul_bt(const double* a, const double* b, double* c, std::size_t n,
               std::size_t m, std::size_t k) {
  if (g_mode == Mode::openmp)
    openmp::matmul_bt(a, b, c, n, m, k);
  else
    serial::matmul_bt(a, b, c, n, m, k);
}

void add_bias_rows(double* x, const double* bias, std::size_t n,
                   std::size_t m) {
  if (g_mode == Mode::openmp)
    openmp::add_bias_rows(x, bias, n, m);
  else
    serial::add_bias_rows(x, bias, n, m);
}

void relu(const double* x, double* y, std::size_t n) {
  if (g_mode == Mode::openmp)
    openmp::relu(x, y, n);
  else
    serial::relu(x, y, n);
}

void relu_grad(const double* x, const double* gy, double* gx, std::size_t n) {
  if (g_mode == Mode::openmp)
    openmp::relu_grad(x, gy, gx, n);
  else
    serial::relu_grad(x, gy, gx, n);
}

void softmax_rows(const double* x, double* y, std::size_t n, std::size_t m) {
  if (g_mode == Mode::openmp)
    openmp::softmax_rows(x, y, n, m);
  else
    serial::softmax_rows(x, y, n, m);
}

}  // namespace crowd::kernels
