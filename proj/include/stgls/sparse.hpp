#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <vector>

#include "common.hpp"

namespace stgls {

/// Compressed sparse row matrix with sorted column indices in every row.
class CsrMatrix {
public:
  CsrMatrix() = default;

  /// Builds a zero-valued matrix with the given sparsity pattern.
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr, std::vector<int> col_idx)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
        values_(col_idx_.size(), 0.0) {
    if (row_ptr_.size() != rows_ + 1) throw PreconditionError("row pointer size mismatch");
  }

  static CsrMatrix identity(std::size_t n) {
    std::vector<std::size_t> ptr(n + 1);
    std::vector<int> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      ptr[i + 1] = i + 1;
      col[i] = int(i);
    }
    CsrMatrix m(n, n, std::move(ptr), std::move(col));
    std::fill(m.values_.begin(), m.values_.end(), 1.0);
    return m;
  }

  /// Dense row-major input; exact zeros are dropped.
  static CsrMatrix from_dense(std::size_t rows, std::size_t cols, std::span<const double> a) {
    std::vector<std::size_t> ptr(rows + 1, 0);
    std::vector<int> col;
    std::vector<double> val;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j)
        if (a[i * cols + j] != 0.0) {
          col.push_back(int(j));
          val.push_back(a[i * cols + j]);
        }
      ptr[i + 1] = col.size();
    }
    CsrMatrix m(rows, cols, std::move(ptr), std::move(col));
    m.values_ = std::move(val);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const int> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Adds v to entry (i, j), which must be in the pattern.
  void add(std::size_t i, int j, double v) {
    auto first = col_idx_.begin() + std::ptrdiff_t(row_ptr_[i]);
    auto last = col_idx_.begin() + std::ptrdiff_t(row_ptr_[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) throw PreconditionError("entry outside the sparsity pattern");
    values_[std::size_t(it - col_idx_.begin())] += v;
  }

  double at(std::size_t i, int j) const {
    auto first = col_idx_.begin() + std::ptrdiff_t(row_ptr_[i]);
    auto last = col_idx_.begin() + std::ptrdiff_t(row_ptr_[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values_[std::size_t(it - col_idx_.begin())];
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += values_[p] * x[std::size_t(col_idx_[p])];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(rows_);
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(std::min(rows_, cols_), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, int(i));
    return d;
  }

  CsrMatrix transpose() const {
    std::vector<std::size_t> ptr(cols_ + 1, 0);
    for (int c : col_idx_) ++ptr[std::size_t(c) + 1];
    for (std::size_t j = 0; j < cols_; ++j) ptr[j + 1] += ptr[j];
    std::vector<int> col(col_idx_.size());
    std::vector<double> val(values_.size());
    std::vector<std::size_t> next(ptr.begin(), ptr.end() - 1);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const std::size_t dst = next[std::size_t(col_idx_[p])]++;
        col[dst] = int(i);
        val[dst] = values_[p];
      }
    CsrMatrix t(cols_, rows_, std::move(ptr), std::move(col));
    t.values_ = std::move(val);
    return t;
  }

  /// MatrixMarket coordinate format (1-based indices).
  void write_matrix_market(std::ostream& os) const {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << rows_ << ' ' << cols_ << ' ' << nonzeros() << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
        os << i + 1 << ' ' << col_idx_[p] + 1 << ' ' << values_[p] << '\n';
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// A linear system over the free degrees of freedom. `lifting` holds the
/// part of the right-hand side produced by prescribed (Dirichlet) values,
/// already subtracted from `rhs`.
struct DiscreteSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<double> lifting;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace stgls
