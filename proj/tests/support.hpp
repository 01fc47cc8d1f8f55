#pragma once

// Independent helpers for the test suite: brute-force geometric oracles and a
// dense direct solver. None of these reuse the library's lookup structures.

#include <cmath>
#include <random>
#include <vector>

#include "stgls/stgls.hpp"

namespace stgls::testing {

/// Lower and upper corners of a leaf in lattice units of the finest level `L`.
template <int D>
std::pair<IntPoint<D>, IntPoint<D>> box_of(const Element<D>& e, int L) {
  IntPoint<D> lo{}, hi{};
  const std::int64_t s = std::int64_t{1} << (L - e.level);
  for (int a = 0; a < D; ++a) {
    lo[a] = e.coords[a] * s;
    hi[a] = lo[a] + s;
  }
  return {lo, hi};
}

/// True if the two boxes touch along a (D-1)-dimensional patch across `axis`,
/// with `b` on side `side` of `a`.
template <int D>
bool share_face(const Element<D>& a, const Element<D>& b, int L, int axis, int side) {
  auto [alo, ahi] = box_of(a, L);
  auto [blo, bhi] = box_of(b, L);
  if (side > 0 ? blo[axis] != ahi[axis] : bhi[axis] != alo[axis]) return false;
  for (int c = 0; c < D; ++c) {
    if (c == axis) continue;
    if (std::min(ahi[c], bhi[c]) <= std::max(alo[c], blo[c])) return false;
  }
  return true;
}

/// All leaves across face (axis, side) of leaf i, by exhaustive scan.
template <int D>
std::vector<std::size_t> brute_neighbors(const Mesh<D>& m, std::size_t i, int axis, int side) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (j != i && share_face(m.element(i), m.element(j), m.max_level(), axis, side)) out.push_back(j);
  return out;
}

/// Largest level difference over all face-adjacent pairs, by exhaustive scan.
template <int D>
int max_face_level_gap(const Mesh<D>& m) {
  int gap = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (int axis = 0; axis < D; ++axis)
      for (std::size_t j : brute_neighbors(m, i, axis, 1))
        gap = std::max(gap, std::abs(m.element(i).level - m.element(j).level));
  return gap;
}

/// Random balanced mesh: `rounds` passes that each refine a random subset of leaves.
template <int D>
Mesh<D> random_balanced_mesh(unsigned seed, int start_level, int rounds, double fraction = 0.2) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mesh<D> m = uniform_mesh(unit_domain<D>(), start_level);
  for (int r = 0; r < rounds; ++r) {
    std::vector<ElementId> marks;
    for (const auto& e : m.elements())
      if (u(rng) < fraction) marks.push_back(e.id);
    if (marks.empty()) marks.push_back(m.element(0).id);
    m = balance_2to1(refine(m, marks));
  }
  return m;
}

/// Replaces every complete family of leaf siblings at `level` by its parent.
template <int D>
Mesh<D> coarsen_complete_families(const Mesh<D>& m, int level) {
  std::vector<ElementId> out;
  std::vector<ElementId> ids(m.ids().begin(), m.ids().end());
  std::vector<char> used(ids.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (used[i]) continue;
    const ElementId id = ids[i];
    if (morton::level_of<D>(id) != level) {
      out.push_back(id);
      continue;
    }
    const ElementId parent = id >> D;
    bool complete = true;
    for (unsigned c = 0; c < (1u << D); ++c)
      if (!m.is_leaf((parent << D) | c)) complete = false;
    if (complete) {
      for (unsigned c = 0; c < (1u << D); ++c) used[*m.index_of((parent << D) | c)] = 1;
      out.push_back(parent);
    } else {
      out.push_back(id);
    }
  }
  return Mesh<D>(m.domain(), out);
}

/// Problem with constant advection whose forcing and boundary data are derived from `ex`.
template <int D>
ProblemSpec<D> manufactured(ExactSolution<D> ex, double nu, SpatialVector<D> a = {}) {
  ProblemSpec<D> pb;
  pb.name = "manufactured";
  pb.nu = nu;
  pb.advection = [a](const Point<D>&) { return a; };
  pb.forcing = [ex, a, nu](const Point<D>& p) {
    const auto g = ex.spatial_gradient(p);
    double s = ex.time_derivative(p) - nu * ex.spatial_laplacian(p);
    for (int i = 0; i < D - 1; ++i) s += a[i] * g[i];
    return s;
  };
  pb.dirichlet_g = ex.value;
  pb.initial_u0 = ex.value;
  pb.exact = std::move(ex);
  return pb;
}

/// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(a[i * n + c]) > std::abs(a[p * n + c])) p = i;
    for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[p * n + j]);
    std::swap(b[c], b[p]);
    for (std::size_t i = c + 1; i < n; ++i) {
      const double f = a[i * n + c] / a[c * n + c];
      for (std::size_t j = c; j < n; ++j) a[i * n + j] -= f * a[c * n + j];
      b[i] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
    x[i] = s / a[i * n + i];
  }
  return x;
}

inline std::vector<double> to_dense(const CsrMatrix& m) {
  std::vector<double> a(m.rows() * m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t p = m.row_ptr()[i]; p < m.row_ptr()[i + 1]; ++p) a[i * m.cols() + m.col_idx()[p]] += m.values()[p];
  return a;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace stgls::testing
