#include "crowd/tensor.hpp"

#include <cmath>

#include "doctest.h"

using crowd::Tensor;

TEST_CASE("factories produce the documented shapes and contents") {
  const Tensor z = Tensor::zeros({2, 3});
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 3);
  CHECK(z.sum() == 0.0);

  const Tensor f = Tensor::full({4}, 2.5);
  CHECK(f.ndim() == 1);
  CHECK(f.size() == 4);
  CHECK(f.sum() == doctest::Approx(10.0));

  const Tensor v = Tensor::vector({1.0, -2.0, 3.0});
  CHECK(v.cols() == 3);
  CHECK(v[1] == -2.0);

  const Tensor m = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  CHECK(m.at(1, 0) == 3.0);

  const Tensor id = Tensor::identity(3);
  CHECK(id.at(0, 0) == 1.0);
  CHECK(id.at(0, 1) == 0.0);
  CHECK(id.sum() == 3.0);
}

TEST_CASE("matrix factory rejects a value count mismatch") {
  CHECK_THROWS_AS(Tensor::matrix(2, 2, {1.0, 2.0, 3.0}), crowd::Error);
}

TEST_CASE("at uses row-major layout") {
  Tensor m = Tensor::zeros({3, 4});
  m.at(2, 1) = 7.0;
  CHECK(m.data[2 * 4 + 1] == 7.0);
}

TEST_CASE("rank-1 tensors act as single rows") {
  const Tensor v = Tensor::vector({5.0, 6.0});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 2);
  CHECK(v.at(0, 1) == 6.0);
}

TEST_CASE("row extraction and assignment round-trip") {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor r = m.row(1);
  CHECK(r.ndim() == 1);
  CHECK(r[0] == 4.0);
  Tensor other = Tensor::zeros({2, 3});
  other.set_row(1, r);
  CHECK(other.at(1, 2) == 6.0);
  CHECK(other.at(0, 0) == 0.0);
}

TEST_CASE("all_finite spots NaN and infinity") {
  Tensor m = Tensor::zeros({2, 2});
  CHECK(m.all_finite());
  m.at(0, 1) = std::nan("");
  CHECK_FALSE(m.all_finite());
  m.at(0, 1) = INFINITY;
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("fill and sum") {
  Tensor m = Tensor::zeros({2, 5});
  m.fill(0.5);
  CHECK(m.sum() == doctest::Approx(5.0));
}

TEST_CASE("shape helpers") {
  CHECK(crowd::shape_product({2, 3, 4}) == 24);
  CHECK(crowd::shape_str({2, 3}) == "(2, 3)");
}
