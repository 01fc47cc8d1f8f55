#pragma once

// Experiment drivers shared by the command line tool and the acceptance run:
// refinement sweeps, profile peaks, the Crank-Nicolson comparison and the
// stabilized/unstabilized conditioning comparison.

#include <chrono>

#include "adapt.hpp"
#include "seqref.hpp"

namespace stgls {

struct ConvergenceRow {
  int level = 0;
  double h = 0.0;
  std::size_t dof = 0;
  double eta = 0.0;
  double err_h = 0.0;
  double err_h_star = 0.0;
  double err_l2 = 0.0;
  std::size_t iterations = 0;
  double seconds = 0.0;
};

template <int D>
std::vector<ConvergenceRow> convergence_study(const ProblemSpec<D>& problem, int degree, int level_lo, int level_hi,
                                              const GlsParams& gls = {}, const SolveConfig& solver = {}) {
  if (level_hi < level_lo) throw PreconditionError("empty level range");
  if (!problem.exact) throw UnsupportedError("problem '" + problem.name + "' has no exact solution");
  std::vector<ConvergenceRow> rows;
  for (int level = level_lo; level <= level_hi; ++level) {
    const auto start = std::chrono::steady_clock::now();
    auto mesh = std::make_shared<const Mesh<D>>(uniform_mesh(problem.domain, level));
    auto sol = solve_problem(mesh, problem, degree, gls, solver);
    const auto err = error_norms(sol.field, problem, gls);
    const auto est = estimate(sol.field, problem, gls);
    ConvergenceRow r;
    r.level = level;
    r.h = mesh->h_max();
    r.dof = sol.n_free;
    r.eta = est.eta;
    r.err_h = err.err_h;
    r.err_h_star = err.err_h_star;
    r.err_l2 = err.err_l2;
    r.iterations = sol.report.iterations;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(r);
  }
  return rows;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("a slope needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log-log slope of a non-positive value");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ConvergenceSlopes {
  double eta = 0.0, err_h = 0.0, err_l2 = 0.0;
};

inline ConvergenceSlopes slopes(const std::vector<ConvergenceRow>& rows) {
  std::vector<double> h, eta, eh, el;
  for (const auto& r : rows) {
    h.push_back(r.h);
    eta.push_back(r.eta);
    eh.push_back(r.err_h);
    el.push_back(r.err_l2);
  }
  return {loglog_slope(h, eta), loglog_slope(h, eh), loglog_slope(h, el)};
}

struct Peak {
  double arc = 0.0;
  double value = 0.0;
};

/// Largest sample, refined by a parabola through it and its two neighbors.
inline Peak find_peak(const std::vector<std::pair<double, double>>& profile) {
  if (profile.empty()) throw PreconditionError("empty profile");
  std::size_t i = 0;
  for (std::size_t j = 1; j < profile.size(); ++j)
    if (profile[j].second > profile[i].second) i = j;
  Peak p{profile[i].first, profile[i].second};
  if (i == 0 || i + 1 == profile.size()) return p;
  const double ym = profile[i - 1].second, y0 = profile[i].second, yp = profile[i + 1].second;
  const double curv = ym - 2 * y0 + yp;
  if (curv >= 0.0) return p;
  const double step = profile[i + 1].first - profile[i].first;
  const double off = 0.5 * (ym - yp) / curv;
  p.arc += off * step;
  p.value = y0 - 0.25 * (ym - yp) * off;
  return p;
}

/// Spatial segment through `center` along `direction`, clipped to the unit square.
struct Segment2 {
  std::array<double, 2> start{}, end{};
};

inline Segment2 clip_line_to_unit_square(std::array<double, 2> center, std::array<double, 2> direction) {
  const double n = std::hypot(direction[0], direction[1]);
  if (!(n > 0.0)) throw PreconditionError("segment direction must be nonzero");
  const std::array<double, 2> u{direction[0] / n, direction[1] / n};
  if (center[0] < 0 || center[0] > 1 || center[1] < 0 || center[1] > 1) throw DomainError("segment center outside the unit square");
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (u[a] == 0.0) continue;
    double s0 = (0.0 - center[a]) / u[a], s1 = (1.0 - center[a]) / u[a];
    if (s0 > s1) std::swap(s0, s1);
    lo = std::max(lo, s0);
    hi = std::min(hi, s1);
  }
  Segment2 s;
  for (int a = 0; a < 2; ++a) {
    s.start[a] = std::clamp(center[a] + lo * u[a], 0.0, 1.0);
    s.end[a] = std::clamp(center[a] + hi * u[a], 0.0, 1.0);
  }
  return s;
}

/// The default profile line: through (1/3, 1/3) along (1, -1), tangent to the rotation there.
inline Segment2 default_ab_segment() { return clip_line_to_unit_square({1.0 / 3, 1.0 / 3}, {1.0, -1.0}); }

using Profile = std::vector<std::pair<double, double>>;

struct MethodProfiles {
  Profile t0, t1;
  Peak peak0, peak1;
  double displacement = 0.0;  ///< |arc of the t = 1 peak - arc of the t = 0 peak|
};

struct CnComparison {
  int level = 0;
  double h = 0.0;
  MethodProfiles space_time, crank_nicolson;
  std::size_t space_time_dof = 0;
  double seconds_space_time = 0.0, seconds_cn = 0.0;
};

inline MethodProfiles summarize(Profile t0, Profile t1) {
  MethodProfiles m;
  m.peak0 = find_peak(t0);
  m.peak1 = find_peak(t1);
  m.displacement = std::abs(m.peak1.arc - m.peak0.arc);
  m.t0 = std::move(t0);
  m.t1 = std::move(t1);
  return m;
}

/// Space-time solve and Crank-Nicolson march of a two-dimensional problem on
/// matching grids, profiled along `seg` at the initial and final times.
inline CnComparison compare_with_crank_nicolson(const ProblemSpec<3>& problem, int level, int degree = 1,
                                                const Segment2& seg = default_ab_segment(), int samples = 801,
                                                const GlsParams& gls = {}, const SolveConfig& solver = {}) {
  CnComparison out;
  out.level = level;
  const double t0 = problem.domain.extent[2].lower, T = problem.domain.extent[2].upper;
  auto tic = std::chrono::steady_clock::now();
  auto mesh = std::make_shared<const Mesh<3>>(uniform_mesh(problem.domain, level));
  out.h = mesh->h_max();
  auto sol = solve_problem(mesh, problem, degree, gls, solver);
  out.space_time_dof = sol.n_free;
  auto st = [&](double t) {
    return sample_profile<3>(sol.field, {seg.start[0], seg.start[1], t}, {seg.end[0], seg.end[1], t}, samples);
  };
  out.space_time = summarize(st(t0), st(T));
  out.seconds_space_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();

  tic = std::chrono::steady_clock::now();
  TimeMarchConfig cfg;
  cfg.level = level;
  cfg.degree = degree;
  cfg.snapshot_times = {t0, T};
  cfg.solver = solver;
  auto cn = crank_nicolson<2>(problem, cfg);
  auto sp = [&](const FieldFunction<2>& f) {
    return sample_profile<2>(f, {seg.start[0], seg.start[1]}, {seg.end[0], seg.end[1]}, samples, false);
  };
  out.crank_nicolson = summarize(sp(cn.snapshots.front().field), sp(cn.snapshots.back().field));
  out.seconds_cn = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
  return out;
}

struct ConditionComparison {
  ConditionEstimate stabilized, unstabilized;
  std::size_t dof = 0;
};

/// Unpreconditioned condition estimates of the assembled system with and without GLS.
template <int D>
ConditionComparison condition_comparison(const ProblemSpec<D>& problem, int level, int degree, GlsParams gls = {},
                                         int iterations = 200) {
  auto mesh = std::make_shared<const Mesh<D>>(uniform_mesh(problem.domain, level));
  gls.enabled = true;
  auto [stab, dofs] = assemble(mesh, problem, degree, gls);
  gls.enabled = false;
  auto plain = assemble(mesh, problem, degree, gls).first;
  ConditionComparison c;
  c.dof = dofs.n_free();
  c.stabilized = estimate_condition(stab.matrix, iterations);
  c.unstabilized = estimate_condition(plain.matrix, iterations);
  return c;
}

} // namespace stgls
