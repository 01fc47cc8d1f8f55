#pragma once

// Right-preconditioned Krylov solvers for nonsymmetric sparse systems and a
// singular-value based condition number estimate.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparse.hpp"

namespace stgls {

enum class KrylovMethod { bicgstab, gmres };
enum class PreconditionerKind { none, jacobi, block_jacobi };

inline const char* to_string(KrylovMethod m) { return m == KrylovMethod::bicgstab ? "bicgstab" : "gmres"; }
inline const char* to_string(PreconditionerKind p) {
  switch (p) {
    case PreconditionerKind::none: return "none";
    case PreconditionerKind::jacobi: return "jacobi";
    case PreconditionerKind::block_jacobi: return "block-jacobi";
  }
  return "?";
}

struct SolveConfig {
  KrylovMethod method = KrylovMethod::bicgstab;
  PreconditionerKind preconditioner = PreconditionerKind::jacobi;
  double rel_tol = 1e-10;
  std::optional<std::size_t> max_iters;  ///< default 10 n
  int restart = 50;                      ///< GMRES restart length
  int block_size = 8;                    ///< block-Jacobi block size

  void validate() const {
    if (!(rel_tol > 0.0)) throw PreconditionError("rel_tol must be positive");
    if (restart < 1) throw PreconditionError("restart must be at least 1");
    if (block_size < 1) throw PreconditionError("block size must be at least 1");
    if (max_iters && *max_iters == 0) throw PreconditionError("max_iters must be positive");
  }
};

struct SolveReport {
  std::size_t iterations = 0;
  double residual = 0.0;  ///< ||b - A x|| / ||b||, recomputed from the returned x
  bool converged = false;
  bool fell_back = false;  ///< BiCGSTAB broke down and GMRES finished the solve
  double seconds = 0.0;
};

namespace detail {

/// Applies M^{-1} for the configured preconditioner.
class Preconditioner {
public:
  Preconditioner(const CsrMatrix& a, const SolveConfig& cfg) : kind_(cfg.preconditioner), n_(a.rows()) {
    if (kind_ == PreconditionerKind::jacobi) {
      inv_diag_ = a.diagonal();
      for (double& d : inv_diag_) d = (d != 0.0) ? 1.0 / d : 1.0;
    } else if (kind_ == PreconditionerKind::block_jacobi) {
      bs_ = std::size_t(cfg.block_size);
      factor_blocks(a);
    }
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    switch (kind_) {
      case PreconditionerKind::none:
        std::copy(r.begin(), r.end(), z.begin());
        break;
      case PreconditionerKind::jacobi:
        for (std::size_t i = 0; i < n_; ++i) z[i] = inv_diag_[i] * r[i];
        break;
      case PreconditionerKind::block_jacobi:
        for (std::size_t b0 = 0, blk = 0; b0 < n_; b0 += bs_, ++blk) apply_block(blk, b0, r, z);
        break;
    }
  }

private:
  // Dense LU with partial pivoting of each contiguous diagonal block.
  void factor_blocks(const CsrMatrix& a) {
    for (std::size_t b0 = 0; b0 < n_; b0 += bs_) {
      const std::size_t m = std::min(bs_, n_ - b0);
      std::vector<double> lu(m * m, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) lu[i * m + j] = a.at(b0 + i, int(b0 + j));
      std::vector<int> piv(m);
      for (std::size_t c = 0; c < m; ++c) {
        std::size_t p = c;
        for (std::size_t i = c + 1; i < m; ++i)
          if (std::abs(lu[i * m + c]) > std::abs(lu[p * m + c])) p = i;
        piv[c] = int(p);
        if (p != c)
          for (std::size_t j = 0; j < m; ++j) std::swap(lu[c * m + j], lu[p * m + j]);
        if (lu[c * m + c] == 0.0) lu[c * m + c] = 1.0;
        for (std::size_t i = c + 1; i < m; ++i) {
          lu[i * m + c] /= lu[c * m + c];
          for (std::size_t j = c + 1; j < m; ++j) lu[i * m + j] -= lu[i * m + c] * lu[c * m + j];
        }
      }
      blocks_.push_back(std::move(lu));
      pivots_.push_back(std::move(piv));
    }
  }

  void apply_block(std::size_t blk, std::size_t b0, std::span<const double> r, std::span<double> z) const {
    const auto& lu = blocks_[blk];
    const auto& piv = pivots_[blk];
    const std::size_t m = piv.size();
    std::vector<double> y(r.begin() + std::ptrdiff_t(b0), r.begin() + std::ptrdiff_t(b0 + m));
    for (std::size_t c = 0; c < m; ++c) std::swap(y[c], y[std::size_t(piv[c])]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < i; ++j) y[i] -= lu[i * m + j] * y[j];
    for (std::size_t i = m; i-- > 0;) {
      for (std::size_t j = i + 1; j < m; ++j) y[i] -= lu[i * m + j] * y[j];
      y[i] /= lu[i * m + i];
    }
    std::copy(y.begin(), y.end(), z.begin() + std::ptrdiff_t(b0));
  }

  PreconditionerKind kind_;
  std::size_t n_;
  std::vector<double> inv_diag_;
  std::size_t bs_ = 1;
  std::vector<std::vector<double>> blocks_;
  std::vector<std::vector<int>> pivots_;
};

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

enum class KrylovStatus { converged, breakdown, max_iters };

/// Returns the status; `it` is advanced by the number of iterations taken.
inline KrylovStatus bicgstab(const CsrMatrix& a, std::span<const double> b, std::vector<double>& x,
                             const Preconditioner& m, double tol_abs, std::size_t max_it, std::size_t& it) {
  const std::size_t n = b.size();
  std::vector<double> r(n), rhat(n), p(n, 0.0), v(n, 0.0), phat(n), s(n), shat(n), t(n);
  a.multiply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  if (norm2(r) <= tol_abs) return KrylovStatus::converged;
  rhat = r;
  const double rhat_norm = norm2(rhat);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  constexpr double tiny = 1e-30;
  for (std::size_t k = 0; k < max_it; ++k) {
    const double rho_new = dot(rhat, r);
    if (std::abs(rho_new) <= tiny * rhat_norm * norm2(r)) return KrylovStatus::breakdown;
    const double beta = (rho_new / rho) * (alpha / omega);
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    m.apply(p, phat);
    a.multiply(phat, v);
    const double rv = dot(rhat, v);
    if (std::abs(rv) <= tiny * rhat_norm * norm2(v)) return KrylovStatus::breakdown;
    alpha = rho_new / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    ++it;
    if (norm2(s) <= tol_abs) {
      axpy(alpha, phat, x);
      return KrylovStatus::converged;
    }
    m.apply(s, shat);
    a.multiply(shat, t);
    const double tt = dot(t, t);
    if (tt == 0.0) return KrylovStatus::breakdown;
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * phat[i] + omega * shat[i];
      r[i] = s[i] - omega * t[i];
    }
    if (norm2(r) <= tol_abs) return KrylovStatus::converged;
    if (omega == 0.0) return KrylovStatus::breakdown;
    rho = rho_new;
  }
  return KrylovStatus::max_iters;
}

/// Restarted GMRES with right preconditioning and Givens rotations.
inline KrylovStatus gmres(const CsrMatrix& a, std::span<const double> b, std::vector<double>& x,
                          const Preconditioner& m, double tol_abs, std::size_t max_it, int restart,
                          std::size_t& it) {
  const std::size_t n = b.size();
  const std::size_t mr = std::size_t(restart);
  std::vector<double> r(n), w(n), z(n);
  std::vector<std::vector<double>> basis(mr + 1, std::vector<double>(n));
  std::vector<double> h((mr + 1) * mr), cs(mr), sn(mr), g(mr + 1);
  std::size_t used = 0;
  while (true) {
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double beta = norm2(r);
    if (beta <= tol_abs) return KrylovStatus::converged;
    if (used >= max_it) return KrylovStatus::max_iters;
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    std::size_t j = 0;
    for (; j < mr && used < max_it; ++j, ++used, ++it) {
      m.apply(basis[j], z);
      a.multiply(z, w);
      for (std::size_t i = 0; i <= j; ++i) {
        h[i * mr + j] = dot(w, basis[i]);
        axpy(-h[i * mr + j], basis[i], w);
      }
      const double hn = norm2(w);
      h[(j + 1) * mr + j] = hn;
      if (hn > 0.0)
        for (std::size_t i = 0; i < n; ++i) basis[j + 1][i] = w[i] / hn;
      for (std::size_t i = 0; i < j; ++i) {
        const double t0 = cs[i] * h[i * mr + j] + sn[i] * h[(i + 1) * mr + j];
        h[(i + 1) * mr + j] = -sn[i] * h[i * mr + j] + cs[i] * h[(i + 1) * mr + j];
        h[i * mr + j] = t0;
      }
      const double den = std::hypot(h[j * mr + j], h[(j + 1) * mr + j]);
      cs[j] = den == 0.0 ? 1.0 : h[j * mr + j] / den;
      sn[j] = den == 0.0 ? 0.0 : h[(j + 1) * mr + j] / den;
      h[j * mr + j] = den;
      h[(j + 1) * mr + j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      if (std::abs(g[j + 1]) <= tol_abs || hn == 0.0) {
        ++j;
        ++used;
        ++it;
        break;
      }
    }
    // back substitution and update x += M^{-1} V y
    std::vector<double> y(j);
    for (std::size_t i = j; i-- > 0;) {
      double s = g[i];
      for (std::size_t l = i + 1; l < j; ++l) s -= h[i * mr + l] * y[l];
      y[i] = h[i * mr + i] != 0.0 ? s / h[i * mr + i] : 0.0;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < j; ++i) axpy(y[i], basis[i], w);
    m.apply(w, z);
    axpy(1.0, z, x);
  }
}

} // namespace detail

/// Solves A x = b from a zero initial guess.
inline std::pair<std::vector<double>, SolveReport> solve(const CsrMatrix& a, std::span<const double> b,
                                                        const SolveConfig& cfg = {}) {
  cfg.validate();
  if (a.rows() != a.cols()) throw PreconditionError("solve requires a square matrix");
  if (b.size() != a.rows()) throw PreconditionError("right-hand side size does not match the matrix");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = a.rows();
  SolveReport rep;
  std::vector<double> x(n, 0.0);
  const double bnorm = norm2(b);
  if (n == 0 || bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const std::size_t max_it = cfg.max_iters.value_or(std::max<std::size_t>(10 * n, 10));
  // a slightly tighter internal target so the recomputed residual still meets rel_tol
  const double tol_abs = 0.5 * cfg.rel_tol * bnorm;
  detail::Preconditioner m(a, cfg);
  detail::KrylovStatus st = detail::KrylovStatus::max_iters;
  std::vector<double> r(n);
  auto true_residual = [&] {
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return norm2(r) / bnorm;
  };
  // the recursively updated residual can drift from the true one; restart from
  // the current iterate while the true residual is above tolerance
  for (int attempt = 0; attempt < 4 && rep.iterations < max_it; ++attempt) {
    const std::size_t budget = max_it - rep.iterations;
    if (cfg.method == KrylovMethod::bicgstab && !rep.fell_back) {
      st = detail::bicgstab(a, b, x, m, tol_abs, budget, rep.iterations);
      if (st == detail::KrylovStatus::breakdown) {
        rep.fell_back = true;
        st = detail::gmres(a, b, x, m, tol_abs, max_it - rep.iterations, cfg.restart, rep.iterations);
      }
    } else {
      st = detail::gmres(a, b, x, m, tol_abs, budget, cfg.restart, rep.iterations);
    }
    rep.residual = true_residual();
    if (st != detail::KrylovStatus::converged || rep.residual <= cfg.rel_tol) break;
  }
  rep.residual = true_residual();
  rep.converged = st == detail::KrylovStatus::converged && rep.residual <= cfg.rel_tol;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(x), rep};
}

inline std::pair<std::vector<double>, SolveReport> solve(const DiscreteSystem& sys, const SolveConfig& cfg = {}) {
  return solve(sys.matrix, sys.rhs, cfg);
}

struct ConditionEstimate {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa = 1.0;
  int iterations = 0;
  bool partial = false;  ///< an inner solve failed; sigma_min is from the last good iterate
};

namespace detail {

/// Dense LU with partial pivoting, P A = L U.
class DenseLu {
public:
  DenseLu(std::vector<double> a, std::size_t n) : n_(n), lu_(std::move(a)), piv_(n) {
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t p = c;
      for (std::size_t i = c + 1; i < n; ++i)
        if (std::abs(lu_[i * n + c]) > std::abs(lu_[p * n + c])) p = i;
      piv_[c] = p;
      if (p != c)
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_[c * n + j], lu_[p * n + j]);
      if (lu_[c * n + c] == 0.0) {
        singular_ = true;
        continue;
      }
      for (std::size_t i = c + 1; i < n; ++i) {
        const double f = lu_[i * n + c] /= lu_[c * n + c];
        if (f == 0.0) continue;
        for (std::size_t j = c + 1; j < n; ++j) lu_[i * n + j] -= f * lu_[c * n + j];
      }
    }
  }

  bool singular() const { return singular_; }

  std::vector<double> solve(std::vector<double> b) const {
    for (std::size_t c = 0; c < n_; ++c) std::swap(b[c], b[piv_[c]]);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < i; ++j) b[i] -= lu_[i * n_ + j] * b[j];
    for (std::size_t i = n_; i-- > 0;) {
      for (std::size_t j = i + 1; j < n_; ++j) b[i] -= lu_[i * n_ + j] * b[j];
      b[i] /= lu_[i * n_ + i];
    }
    return b;
  }

  /// Solves A^T x = b.
  std::vector<double> solve_transpose(std::vector<double> b) const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < i; ++j) b[i] -= lu_[j * n_ + i] * b[j];
      b[i] /= lu_[i * n_ + i];
    }
    for (std::size_t i = n_; i-- > 0;)
      for (std::size_t j = i + 1; j < n_; ++j) b[i] -= lu_[j * n_ + i] * b[j];
    for (std::size_t c = n_; c-- > 0;) std::swap(b[c], b[piv_[c]]);
    return b;
  }

private:
  std::size_t n_;
  std::vector<double> lu_;
  std::vector<std::size_t> piv_;
  bool singular_ = false;
};

} // namespace detail

/// 2-norm condition number: sigma_max by power iteration on A^T A, sigma_min by
/// inverse iteration on A^T A. Both start from the all-ones vector. The inverse
/// iteration factors A densely when it has at most `dense_limit` rows and uses
/// Krylov solves configured by `inner` otherwise.
inline ConditionEstimate estimate_condition(const CsrMatrix& a, int iters = 100, SolveConfig inner = {},
                                            std::size_t dense_limit = 4000) {
  if (a.rows() != a.cols()) throw PreconditionError("condition estimate requires a square matrix");
  if (iters < 1) throw PreconditionError("iteration count must be positive");
  const std::size_t n = a.rows();
  ConditionEstimate est;
  if (n == 0) return est;
  const CsrMatrix at = a.transpose();
  std::vector<double> v(n, 1.0 / std::sqrt(double(n))), w(n), z(n);

  double lmax = 0.0;
  for (int k = 0; k < iters; ++k) {
    a.multiply(v, w);
    at.multiply(w, z);
    lmax = norm2(z);
    if (lmax == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) v[i] = z[i] / lmax;
  }
  est.sigma_max = std::sqrt(lmax);

  std::optional<detail::DenseLu> lu;
  if (n <= dense_limit) {
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p) dense[i * n + a.col_idx()[p]] += a.values()[p];
    lu.emplace(std::move(dense), n);
    if (lu->singular()) {
      est.kappa = std::numeric_limits<double>::infinity();
      return est;
    }
  }
  inner.rel_tol = std::min(inner.rel_tol, 1e-12);
  std::fill(v.begin(), v.end(), 1.0 / std::sqrt(double(n)));
  double lmin_inv = 0.0;
  for (int k = 0; k < iters; ++k) {
    std::vector<double> x;
    if (lu) {
      x = lu->solve(lu->solve_transpose(v));
    } else {
      auto [y, r1] = solve(at, v, inner);
      if (!r1.converged) {
        est.partial = true;
        break;
      }
      auto [xk, r2] = solve(a, y, inner);
      if (!r2.converged) {
        est.partial = true;
        break;
      }
      x = std::move(xk);
    }
    const double nx = norm2(x);
    if (nx == 0.0) break;
    lmin_inv = nx;
    for (std::size_t i = 0; i < n; ++i) v[i] = x[i] / nx;
    est.iterations = k + 1;
  }
  est.sigma_min = lmin_inv > 0.0 ? 1.0 / std::sqrt(lmin_inv) : 0.0;
  est.kappa = est.sigma_min > 0.0 ? std::max(1.0, est.sigma_max / est.sigma_min)
                                  : std::numeric_limits<double>::infinity();
  return est;
}

} // namespace stgls
