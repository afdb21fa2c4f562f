#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace latinv {

#ifdef LATINV_FLOAT32
using Real = float;
#else
using Real = double;
#endif

/// Dense row-major matrix. Rows are samples when used as a batch.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, Real fill = Real(0)) : rows(r), cols(c), values(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<Real> v);

  static Matrix from_rows(std::initializer_list<std::initializer_list<Real>> rows);
  static Matrix row_vector(std::span<const Real> v);

  Real& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<Real> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const Real> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using EigenRowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMatrix>;
using ConstEigenMap = Eigen::Map<const EigenRowMatrix>;

inline EigenMap as_eigen(Matrix& m) {
  return EigenMap(m.values.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
}
inline ConstEigenMap as_eigen(const Matrix& m) {
  return ConstEigenMap(m.values.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
}

/// Column-wise concatenation of two matrices with the same row count.
Matrix hconcat(const Matrix& left, const Matrix& right);
/// Splits columns [begin, begin+count) into a new matrix.
Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count);

}  // namespace latinv
