#include "udc/nnet/tensor.hpp"

namespace udc::nn {

Matrix::Matrix(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(r) * c) {
    throw Error("shape_mismatch", "matrix payload does not match " + shape_str());
  }
}

std::string Matrix::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

void shape_mismatch(const std::string& op, const Matrix& a, const Matrix& b) {
  throw Error("shape_mismatch", op + " " + a.shape_str() + " vs " + b.shape_str());
}

void gemm(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.rows) shape_mismatch("matmul", a, b);
  out = Matrix(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ar = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = ar[k];
      if (av == 0.0) continue;
      const double* br = b.row(k);
      for (int j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
}

void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  // out (a.cols x b.cols) += sum_r a[r]^T b[r]
  for (int r = 0; r < a.rows; ++r) {
    const double* ar = a.row(r);
    const double* br = b.row(r);
    for (int i = 0; i < a.cols; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = out.row(i);
      for (int j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
}

void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  // out (a.rows x b.rows) += a b^T
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* o = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0;
      for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      o[j] += s;
    }
  }
}

}  // namespace udc::nn
