#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "crowd/util.hpp"

namespace crowd {

// Dense row-major tensor of 64-bit floats. Rank 1 (vectors) and rank 2
// (matrices) cover everything in this library.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor identity(std::size_t n);

  std::size_t size() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }

  std::size_t rows() const {
    require(ndim() >= 1 && ndim() <= 2, "Tensor::rows: rank ", ndim());
    return ndim() == 2 ? shape[0] : 1;
  }
  std::size_t cols() const {
    require(ndim() >= 1 && ndim() <= 2, "Tensor::cols: rank ", ndim());
    return ndim() == 2 ? shape[1] : shape[0];
  }

  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  // One row of a matrix as a fresh rank-1 tensor.
  Tensor row(std::size_t i) const;
  void set_row(std::size_t i, const Tensor& r);

  void fill(double v);
  double sum() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace crowd
