#include "cafv/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "cafv/errors.hpp"

namespace cafv {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vec(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on tensor of shape " + shape_str());
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on tensor of shape " + shape_str());
  return shape[1];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data[i * shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data[i * shape[1] + j];
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value() on tensor of shape " + shape_str());
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

Tensor transpose(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("transpose on tensor of shape " + m.shape_str());
  Tensor out = Tensor::zeros({m.shape[1], m.shape[0]});
  for (std::size_t i = 0; i < m.shape[0]; ++i) {
    for (std::size_t j = 0; j < m.shape[1]; ++j) {
      out.at(j, i) = m.at(i, j);
    }
  }
  return out;
}

Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("gemm needs rank-2 operands, got " + a.shape_str() + " and " +
                     b.shape_str());
  }
  const std::size_t m = trans_a ? a.shape[1] : a.shape[0];
  const std::size_t k = trans_a ? a.shape[0] : a.shape[1];
  const std::size_t kb = trans_b ? b.shape[1] : b.shape[0];
  const std::size_t n = trans_b ? b.shape[0] : b.shape[1];
  if (k != kb) {
    throw ShapeError("gemm inner dimensions differ: " + a.shape_str() +
                     (trans_a ? "^T" : "") + " x " + b.shape_str() + (trans_b ? "^T" : ""));
  }

  Tensor out = Tensor::zeros({m, n});
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* po = out.data.data();

  if (!trans_a && !trans_b) {
    // Row-major friendly: for each (i, j) the k-sum still runs ascending.
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = pa[i * k + kk];
        const double* brow = pb + kk * n;
        double* orow = po + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = pa + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = pb + j * k;
        double acc = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        po[i * n + j] = acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* arow = pa + kk * m;
      const double* brow = pb + kk * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double aik = arow[i];
        double* orow = po + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) acc += pa[kk * m + i] * pb[j * k + kk];
        po[i * n + j] = acc;
      }
    }
  }
  return out;
}

}  // namespace cafv
