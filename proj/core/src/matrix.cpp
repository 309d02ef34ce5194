#include "dacl/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dacl {

Matrix Matrix::row(std::initializer_list<double> xs) {
  Matrix m(1, xs.size());
  std::copy(xs.begin(), xs.end(), m.data_.begin());
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " + a.shape_str() +
                                " * " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  addmul_nn(out, a, b);
  return out;
}

void addmul_nn(Matrix& out, const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.row_ptr(i);
    const double* arow = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;  // bag-of-words batches are mostly zeros
      const double* brow = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

void addmul_nt(Matrix& out, const Matrix& a, const Matrix& b) {
  // out(i,j) += dot(a.row(i), b.row(j))
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      orow[j] += acc;
    }
  }
}

void addmul_tn(Matrix& out, const Matrix& a, const Matrix& b) {
  // out(i,j) += sum_p a(p,i) * b(p,j)
  const std::size_t n = a.rows(), r = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < n; ++p) {
    const double* arow = a.row_ptr(p);
    const double* brow = b.row_ptr(p);
    for (std::size_t i = 0; i < r; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.row_ptr(i);
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

Matrix transposed(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.empty() && top.rows() == 0) return bottom;
  if (bottom.empty() && bottom.rows() == 0) return top;
  if (top.cols() != bottom.cols()) {
    throw std::invalid_argument("vstack: column counts disagree: " + top.shape_str() +
                                " vs " + bottom.shape_str());
  }
  Matrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.data().begin(), top.data().end(), out.data().begin());
  std::copy(bottom.data().begin(), bottom.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

}  // namespace dacl
