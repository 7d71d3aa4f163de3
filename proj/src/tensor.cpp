#include "crowd/tensor.hpp"

#include <numeric>

namespace crowd {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.data.assign(shape_product(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t = zeros(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols) {
  return zeros({rows, cols});
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  require(values.size() == rows * cols, "Tensor::matrix: ", values.size(),
          " values for shape (", rows, ", ", cols, ")");
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::row(std::size_t i) const {
  std::size_t c = cols();
  Tensor r;
  r.shape = {c};
  r.data.assign(data.begin() + static_cast<std::ptrdiff_t>(i * c),
                data.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
  return r;
}

void Tensor::set_row(std::size_t i, const Tensor& r) {
  std::size_t c = cols();
  require(r.size() == c, "set_row: size mismatch");
  for (std::size_t j = 0; j < c; ++j) data[i * c + j] = r.data[j];
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

double Tensor::sum() const {
  return std::accumulate(data.begin(), data.end(), 0.0);
}

}  // namespace crowd
