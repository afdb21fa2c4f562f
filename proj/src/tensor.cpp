#include "latinv/tensor.hpp"

#include <cmath>
#include <string>

#include "latinv/error.hpp"

namespace latinv {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<Real> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw InvalidInput("matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                       std::to_string(values.size()) + " values");
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<Real>> init) {
  Matrix m;
  m.rows = init.size();
  m.cols = m.rows ? init.begin()->size() : 0;
  m.values.reserve(m.rows * m.cols);
  for (const auto& r : init) {
    if (r.size() != m.cols) throw InvalidInput("ragged matrix initializer");
    m.values.insert(m.values.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::row_vector(std::span<const Real> v) { return Matrix(1, v.size(), std::vector<Real>(v.begin(), v.end())); }

bool Matrix::all_finite() const {
  for (Real x : values) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix hconcat(const Matrix& left, const Matrix& right) {
  if (left.rows != right.rows) throw InvalidInput("hconcat: row counts differ");
  Matrix out(left.rows, left.cols + right.cols);
  for (std::size_t r = 0; r < left.rows; ++r) {
    auto dst = out.row(r);
    auto a = left.row(r);
    auto b = right.row(r);
    std::copy(a.begin(), a.end(), dst.begin());
    std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(left.cols));
  }
  return out;
}

Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.cols) throw InvalidInput("column_slice out of range");
  Matrix out(m.rows, count);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto src = m.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace latinv
