#pragma once

// Tensor-product Lagrange shape functions on the reference cube [0,1]^D and
// tensor Gauss-Legendre quadrature.

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "common.hpp"

namespace stgls {

/// Lagrange polynomials of degree k through the equispaced nodes j/k on [0,1].
class Lagrange1D {
public:
  explicit Lagrange1D(int degree) : k_(degree) {
    check_degree(degree);
    for (int j = 0; j <= k_; ++j) nodes_[j] = double(j) / k_;
  }

  int degree() const { return k_; }
  double node(int j) const { return nodes_[j]; }

  double value(int j, double x) const {
    double v = 1.0;
    for (int m = 0; m <= k_; ++m)
      if (m != j) v *= (x - nodes_[m]) / (nodes_[j] - nodes_[m]);
    return v;
  }

  double derivative(int j, double x) const {
    double sum = 0.0;
    for (int m = 0; m <= k_; ++m) {
      if (m == j) continue;
      double term = 1.0 / (nodes_[j] - nodes_[m]);
      for (int l = 0; l <= k_; ++l)
        if (l != j && l != m) term *= (x - nodes_[l]) / (nodes_[j] - nodes_[l]);
      sum += term;
    }
    return sum;
  }

  double second_derivative(int j, double x) const {
    double sum = 0.0;
    for (int m = 0; m <= k_; ++m) {
      if (m == j) continue;
      for (int l = 0; l <= k_; ++l) {
        if (l == j || l == m) continue;
        double term = 1.0 / ((nodes_[j] - nodes_[m]) * (nodes_[j] - nodes_[l]));
        for (int q = 0; q <= k_; ++q)
          if (q != j && q != m && q != l) term *= (x - nodes_[q]) / (nodes_[j] - nodes_[q]);
        sum += term;
      }
    }
    return sum;
  }

private:
  int k_;
  std::array<double, 4> nodes_{};
};

/// Q_k basis on [0,1]^D. Local node i has multi-index (i_0, ..., i_{D-1}) with
/// i = sum_a i_a (k+1)^a, i.e. axis 0 varies fastest.
template <int D>
class TensorBasis {
public:
  explicit TensorBasis(int degree) : line_(degree), n1_(degree + 1), size_(int(ipow(degree + 1, D))) {}

  int degree() const { return line_.degree(); }
  int size() const { return size_; }
  const Lagrange1D& line() const { return line_; }

  std::array<int, D> multi_index(int i) const {
    std::array<int, D> m{};
    for (int a = 0; a < D; ++a) {
      m[a] = i % n1_;
      i /= n1_;
    }
    return m;
  }

  Point<D> node(int i) const {
    const auto m = multi_index(i);
    Point<D> p{};
    for (int a = 0; a < D; ++a) p[a] = line_.node(m[a]);
    return p;
  }

  void values(const Point<D>& p, std::span<double> out) const {
    check_point(p);
    Table t = tabulate(p);
    for (int i = 0; i < size_; ++i) {
      const auto m = multi_index(i);
      double v = 1.0;
      for (int a = 0; a < D; ++a) v *= t.v[a][m[a]];
      out[i] = v;
    }
  }

  /// Row-major [size x D] reference gradients.
  void gradients(const Point<D>& p, std::span<double> out) const {
    check_point(p);
    Table t = tabulate(p);
    for (int i = 0; i < size_; ++i) {
      const auto m = multi_index(i);
      for (int b = 0; b < D; ++b) {
        double v = 1.0;
        for (int a = 0; a < D; ++a) v *= (a == b ? t.d[a][m[a]] : t.v[a][m[a]]);
        out[i * D + b] = v;
      }
    }
  }

  /// Row-major [size x D] pure second derivatives d^2 N_i / d xi_b^2.
  void pure_second_derivatives(const Point<D>& p, std::span<double> out) const {
    check_point(p);
    Table t = tabulate(p);
    for (int i = 0; i < size_; ++i) {
      const auto m = multi_index(i);
      for (int b = 0; b < D; ++b) {
        double v = 1.0;
        for (int a = 0; a < D; ++a) v *= (a == b ? t.dd[a][m[a]] : t.v[a][m[a]]);
        out[i * D + b] = v;
      }
    }
  }

  std::vector<double> values(const Point<D>& p) const {
    std::vector<double> v(size_);
    values(p, v);
    return v;
  }
  std::vector<double> gradients(const Point<D>& p) const {
    std::vector<double> g(size_ * D);
    gradients(p, g);
    return g;
  }
  std::vector<double> pure_second_derivatives(const Point<D>& p) const {
    std::vector<double> g(size_ * D);
    pure_second_derivatives(p, g);
    return g;
  }

private:
  struct Table {
    std::array<std::array<double, 4>, D> v{}, d{}, dd{};
  };

  static void check_point(const Point<D>& p) {
    constexpr double tol = 1e-12;
    for (int a = 0; a < D; ++a)
      if (!(p[a] >= -tol && p[a] <= 1.0 + tol)) throw DomainError("point outside the reference cube");
  }

  Table tabulate(const Point<D>& p) const {
    Table t;
    for (int a = 0; a < D; ++a)
      for (int j = 0; j < n1_; ++j) {
        t.v[a][j] = line_.value(j, p[a]);
        t.d[a][j] = line_.derivative(j, p[a]);
        t.dd[a][j] = line_.second_derivative(j, p[a]);
      }
    return t;
  }

  Lagrange1D line_;
  int n1_;
  int size_;
};

struct QuadratureRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

/// q-point Gauss-Legendre rule on [0,1]; weights sum to one.
inline QuadratureRule1D gauss_legendre(int q) {
  if (q < 1 || q > 10) throw PreconditionError("quadrature points per axis must be in [1, 10]");
  QuadratureRule1D rule;
  rule.points.resize(q);
  rule.weights.resize(q);
  // P_q(x) and P_q'(x) by the three-term recurrence
  auto legendre = [q](double x) {
    double p0 = 1.0, p1 = x;
    for (int n = 2; n <= q; ++n) {
      const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, q * (x * p1 - p0) / (x * x - 1.0)};
  };
  for (int i = 0; i < q; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    // map [-1,1] -> [0,1]
    rule.points[q - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[q - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

template <int D>
struct QuadratureRule {
  std::vector<Point<D>> points;
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};

/// Tensor Gauss-Legendre rule with q points per axis on [0,1]^D.
template <int D>
QuadratureRule<D> gauss_rule(int q) {
  const auto line = gauss_legendre(q);
  QuadratureRule<D> rule;
  const int n = int(ipow(q, D));
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = i;
    double w = 1.0;
    for (int a = 0; a < D; ++a) {
      const int j = r % q;
      r /= q;
      rule.points[i][a] = line.points[j];
      w *= line.weights[j];
    }
    rule.weights[i] = w;
  }
  return rule;
}

/// Points per axis used for element integrals with degree-k shape functions.
inline int quadrature_points_for(int degree) { return degree + 2; }

/// Shape functions and reference derivatives evaluated at every point of a rule.
template <int D>
struct Tabulation {
  int n_basis = 0;
  std::size_t n_points = 0;
  std::vector<double> values;  ///< [point][basis]
  std::vector<double> grads;   ///< [point][basis][axis]
  std::vector<double> second;  ///< [point][basis][axis]

  Tabulation() = default;
  Tabulation(const TensorBasis<D>& basis, std::span<const Point<D>> points)
      : n_basis(basis.size()), n_points(points.size()) {
    values.resize(n_points * n_basis);
    grads.resize(n_points * n_basis * D);
    second.resize(n_points * n_basis * D);
    for (std::size_t q = 0; q < n_points; ++q) {
      basis.values(points[q], std::span<double>(values).subspan(q * n_basis, n_basis));
      basis.gradients(points[q], std::span<double>(grads).subspan(q * n_basis * D, n_basis * D));
      basis.pure_second_derivatives(points[q], std::span<double>(second).subspan(q * n_basis * D, n_basis * D));
    }
  }

  double value(std::size_t q, int i) const { return values[q * n_basis + i]; }
  double grad(std::size_t q, int i, int a) const { return grads[(q * n_basis + i) * D + a]; }
  double d2(std::size_t q, int i, int a) const { return second[(q * n_basis + i) * D + a]; }
};

} // namespace stgls
