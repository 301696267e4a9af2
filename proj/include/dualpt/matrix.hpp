#ifndef DUALPT_MATRIX_HPP
#define DUALPT_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dualpt/errors.hpp"

namespace dualpt {

// Dense row-major matrix of doubles. Embedding blocks (tokens, prompts,
// descriptors), cost matrices and transport plans all use this one type;
// there is no BLAS behind it and no view machinery beyond row spans.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw ShapeMismatch("from_rows: ragged row lengths");
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("max_abs_diff: shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = std::fabs(a(i, j) - b(i, j));
      if (d > m) m = d;
    }
  return m;
}

// Discrete probability vector: nonnegative weights summing to 1 within 1e-12.
class ProbVector {
 public:
  ProbVector() = default;

  explicit ProbVector(std::vector<double> weights) : w_(std::move(weights)) {
    double sum = 0.0;
    for (double v : w_) {
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidDistribution("probability weights must be finite and >= 0");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw InvalidDistribution("probability weights must sum to 1 within 1e-12");
  }

  static ProbVector uniform(std::size_t n) {
    if (n == 0) throw InvalidDistribution("uniform distribution needs n >= 1");
    return ProbVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> weights() const { return w_; }

  friend bool operator==(const ProbVector& a, const ProbVector& b) { return a.w_ == b.w_; }

 private:
  std::vector<double> w_;
};

}  // namespace dualpt

#endif  // DUALPT_MATRIX_HPP
