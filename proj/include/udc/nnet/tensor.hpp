#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "udc/common.hpp"

namespace udc::nn {

/// Dense row-major matrix of doubles. Rows index nodes/edges, columns index
/// features throughout the library.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  Matrix(int r, int c, std::vector<double> values);

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;
};

/// out = a * b (accumulates into a zeroed out).
void gemm(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a^T * b
void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a * b^T
void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out);

[[noreturn]] void shape_mismatch(const std::string& op, const Matrix& a, const Matrix& b);

}  // namespace udc::nn
