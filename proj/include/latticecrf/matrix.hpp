#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace latticecrf {

// Dense row-major matrix of doubles. All pixel-indexed quantities in this
// library (unary costs, marginals, messages, filter values) are N x L
// matrices with the pixel index on rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double value = 0.0) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    data_.assign(static_cast<size_t>(rows) * static_cast<size_t>(cols), value);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace latticecrf
