#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace beamlab {

/// Dense row-major matrix. Just enough linear algebra for the network; every
/// kernel sums in a fixed element order (ascending inner index, one owner
/// per output element), so results are bit-identical for any thread count.
template <typename Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Real{0}) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Real& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  Real operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  Real* row(std::size_t i) { return data_.data() + i * cols_; }
  const Real* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::span<Real> row_span(std::size_t i) { return {row(i), cols_}; }
  std::span<const Real> row_span(std::size_t i) const { return {row(i), cols_}; }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

/// C = A * B^T. A is [n x k], B is [m x k], C is [n x m].
///
/// B is transposed into a scratch first so the accumulation runs as an
/// axpy over contiguous C rows: that form vectorizes without reassociating
/// any per-element sum (each C element still accumulates in ascending t),
/// where the naive dot-product loop stays scalar under strict FP semantics.
template <typename Real>
void matmul_nt(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: shape");
  c = Matrix<Real>(a.rows(), b.rows());
  const std::size_t k = a.cols();
  Matrix<Real> bt(k, b.rows());
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const Real* brow = b.row(j);
    for (std::size_t t = 0; t < k; ++t) bt(t, j) = brow[t];
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a.rows()); ++i) {
    const Real* arow = a.row(static_cast<std::size_t>(i));
    Real* crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t t = 0; t < k; ++t) {
      const Real s = arow[t];
      const Real* btrow = bt.row(t);
      for (std::size_t j = 0; j < b.rows(); ++j) crow[j] += s * btrow[j];
    }
  }
}

/// C = A * B. A is [n x k], B is [k x m], C is [n x m].
template <typename Real>
void matmul_nn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul_nn: shape");
  c = Matrix<Real>(a.rows(), b.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a.rows()); ++i) {
    const Real* arow = a.row(static_cast<std::size_t>(i));
    Real* crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t t = 0; t < a.cols(); ++t) {
      const Real s = arow[t];
      const Real* brow = b.row(t);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += s * brow[j];
    }
  }
}

/// C = A^T * B. A is [k x n], B is [k x m], C is [n x m].
template <typename Real>
void matmul_tn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: shape");
  c = Matrix<Real>(a.cols(), b.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(a.cols()); ++j) {
    Real* crow = c.row(static_cast<std::size_t>(j));
    for (std::size_t t = 0; t < a.rows(); ++t) {
      const Real s = a(t, static_cast<std::size_t>(j));
      const Real* brow = b.row(t);
      for (std::size_t m = 0; m < b.cols(); ++m) crow[m] += s * brow[m];
    }
  }
}

}  // namespace beamlab
