#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dacl {

// Dense row-major matrix of 64-bit reals. The one storage type the autodiff
// engine and the networks operate on. Zero-sized dimensions are allowed
// (an n x 0 block concatenates away cleanly).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix constant(std::size_t rows, std::size_t cols, double v) {
    return Matrix(rows, cols, v);
  }
  // 1 x n row, handy for literals in tests and bias vectors.
  static Matrix row(std::initializer_list<double> xs);
  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* row_ptr(std::size_t r) noexcept { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const noexcept { return data_.data() + r * cols_; }

  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape_str() const;  // e.g. "3x4"

  void fill(double v);
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a * b; throws std::invalid_argument naming both shapes on a mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// Accumulating kernels used by the backward pass. Shapes must already agree.
void addmul_nn(Matrix& out, const Matrix& a, const Matrix& b);  // out += a * b
void addmul_nt(Matrix& out, const Matrix& a, const Matrix& b);  // out += a * b^T
void addmul_tn(Matrix& out, const Matrix& a, const Matrix& b);  // out += a^T * b

Matrix transposed(const Matrix& a);
Matrix vstack(const Matrix& top, const Matrix& bottom);

}  // namespace dacl
