#include "crowd/kernels.hpp"

#include <cstring>
#include <vector>

#include "crowd/rng.hpp"
#include "doctest.h"

namespace kn = crowd::kernels;

namespace {

std::vector<double> randbuf(std::size_t n, std::uint64_t seed) {
  crowd::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

bool bitwise_equal(const std::vector<double>& a,
                   const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("matmul matches a hand computation") {
  // [1 2; 3 4] [5 6; 7 8] = [19 22; 43 50]
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {5, 6, 7, 8};
  std::vector<double> c(4);
  kn::serial::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c[0] == 19.0);
  CHECK(c[1] == 22.0);
  CHECK(c[2] == 43.0);
  CHECK(c[3] == 50.0);
}

TEST_CASE("matmul_at computes A^T B") {
  // A[2,1] = [1; 2], B[2,3] = [1 2 3; 4 5 6], A^T B = [9 12 15]
  const std::vector<double> a = {1, 2};
  const std::vector<double> b = {1, 2, 3, 4, 5, 6};
  std::vector<double> c(3);
  kn::serial::matmul_at(a.data(), b.data(), c.data(), 2, 1, 3);
  CHECK(c[0] == 9.0);
  CHECK(c[1] == 12.0);
  CHECK(c[2] == 15.0);
}

TEST_CASE("matmul_bt computes A B^T") {
  // A[1,2] = [1 2], B[3,2] = [1 2; 3 4; 5 6], A B^T = [5 11 17]
  const std::vector<double> a = {1, 2};
  const std::vector<double> b = {1, 2, 3, 4, 5, 6};
  std::vector<double> c(3);
  kn::serial::matmul_bt(a.data(), b.data(), c.data(), 1, 2, 3);
  CHECK(c[0] == 5.0);
  CHECK(c[1] == 11.0);
  CHECK(c[2] == 17.0);
}

TEST_CASE("softmax rows sum to one and order preserves") {
  const std::vector<double> x = {1.0, 2.0, 3.0, -1.0, 0.0, 1.0};
  std::vector<double> y(6);
  kn::serial::softmax_rows(x.data(), y.data(), 2, 3);
  for (std::size_t r = 0; r < 2; ++r) {
    const double s = y[3 * r] + y[3 * r + 1] + y[3 * r + 2];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y[3 * r] < y[3 * r + 1]);
    CHECK(y[3 * r + 1] < y[3 * r + 2]);
  }
}

TEST_CASE("softmax is shift invariant via max subtraction") {
  const std::vector<double> x = {1000.0, 1001.0, 999.0};
  std::vector<double> y(3);
  kn::serial::softmax_rows(x.data(), y.data(), 1, 3);
  std::vector<double> xs = {0.0, 1.0, -1.0};
  std::vector<double> ys(3);
  kn::serial::softmax_rows(xs.data(), ys.data(), 1, 3);
  CHECK(bitwise_equal(y, ys));
}

TEST_CASE("relu and relu_grad") {
  const std::vector<double> x = {-1.0, 0.0, 2.0};
  std::vector<double> y(3);
  kn::serial::relu(x.data(), y.data(), 3);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);
  const std::vector<double> gy = {5.0, 5.0, 5.0};
  std::vector<double> gx(3);
  kn::serial::relu_grad(x.data(), gy.data(), gx.data(), 3);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 5.0);
}

TEST_CASE("openmp kernels are bitwise identical to serial") {
  const std::size_t n = 67, k = 31, m = 53;  // odd sizes cross chunk edges
  const auto a = randbuf(n * k, 11);
  const auto b = randbuf(k * m, 12);
  const auto bn = randbuf(n * m, 13);
  const auto bt = randbuf(m * k, 14);
  const auto flat = randbuf(n * m, 15);

  std::vector<double> s(n * m), p(n * m);
  kn::serial::matmul(a.data(), b.data(), s.data(), n, k, m);
  kn::openmp::matmul(a.data(), b.data(), p.data(), n, k, m);
  CHECK(bitwise_equal(s, p));

  std::vector<double> sat(k * m), pat(k * m);
  kn::serial::matmul_at(a.data(), bn.data(), sat.data(), n, k, m);
  kn::openmp::matmul_at(a.data(), bn.data(), pat.data(), n, k, m);
  CHECK(bitwise_equal(sat, pat));

  std::vector<double> sbt(n * m), pbt(n * m);
  kn::serial::matmul_bt(a.data(), bt.data(), sbt.data(), n, m, k);
  kn::openmp::matmul_bt(a.data(), bt.data(), pbt.data(), n, m, k);
  CHECK(bitwise_equal(sbt, pbt));

  std::vector<double> ssm(n * m), psm(n * m);
  kn::serial::softmax_rows(flat.data(), ssm.data(), n, m);
  kn::openmp::softmax_rows(flat.data(), psm.data(), n, m);
  CHECK(bitwise_equal(ssm, psm));

  std::vector<double> sr(n * m), pr(n * m);
  kn::serial::relu(flat.data(), sr.data(), n * m);
  kn::openmp::relu(flat.data(), pr.data(), n * m);
  CHECK(bitwise_equal(sr, pr));

  std::vector<double> sb2 = flat, pb2 = flat;
  const auto bias = randbuf(m, 16);
  kn::serial::add_bias_rows(sb2.data(), bias.data(), n, m);
  kn::openmp::add_bias_rows(pb2.data(), bias.data(), n, m);
  CHECK(bitwise_equal(sb2, pb2));
}

TEST_CASE("dispatch honors the active mode") {
  const kn::Mode before = kn::active_mode();
  const auto a = randbuf(4, 21);
  const auto b = randbuf(4, 22);
  std::vector<double> via_serial(4), via_openmp(4);
  kn::set_mode(kn::Mode::serial);
  kn::matmul(a.data(), b.data(), via_serial.data(), 2, 2, 2);
  kn::set_mode(kn::Mode::openmp);
  kn::matmul(a.data(), b.data(), via_openmp.data(), 2, 2, 2);
  kn::set_mode(before);
  CHECK(bitwise_equal(via_serial, via_openmp));
}
