#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cafv {

// Dense row-major tensor of doubles. Scalars use shape {1}.
// Invariant: product(shape) == data.size().
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);
  static Tensor vec(std::vector<double> values);                      // [n]
  static Tensor row(std::vector<double> values);                      // [1, n]
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rank() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double value() const;  // numel()==1 only

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

// C = op(A) * op(B) with optional transposes. For every output element the
// accumulation over the inner dimension runs in fixed ascending order, so
// results are bit-reproducible regardless of the loop variant chosen.
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

Tensor transpose(const Tensor& m);

}  // namespace cafv
