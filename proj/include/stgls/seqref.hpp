#pragma once

// Crank-Nicolson time marching with plain Galerkin in space, used as the
// sequential reference for the space-time solver:
//
//   (M/dt + A/2) u^{n+1} = (M/dt - A/2) u^n + (F^n + F^{n+1}) / 2
//
// M is the consistent mass matrix and A the advection-diffusion stiffness
// (a . grad u, v) + nu (grad u, grad v). The advection field is sampled at
// t = 0, so time-dependent fields are not supported.

#include <cmath>
#include <memory>

#include "assembly.hpp"

namespace stgls {

struct TimeMarchConfig {
  int level = 5;                     ///< uniform spatial refinement level
  int degree = 1;
  std::optional<int> steps;          ///< default 2^level
  std::vector<double> snapshot_times{0.0, 1.0};
  SolveConfig solver{};

  void validate() const {
    check_degree(degree);
    if (level < 0) throw PreconditionError("level must be non-negative");
    if (steps && *steps < 1) throw PreconditionError("steps must be positive");
  }
  int step_count() const { return steps.value_or(1 << level); }
};

/// Spatial field at time t.
template <int d>
struct Snapshot {
  double time = 0.0;
  int step = 0;
  FieldFunction<d> field;
};

template <int d>
struct TimeMarchResult {
  FieldFunction<d> final_field;
  std::vector<Snapshot<d>> snapshots;
  double dt = 0.0;
  int steps = 0;
  std::size_t iterations = 0;  ///< Krylov iterations over all steps
};

namespace detail {

template <int d>
Point<d + 1> space_time_point(const Point<d>& x, double t) {
  Point<d + 1> p{};
  for (int a = 0; a < d; ++a) p[a] = x[a];
  p[d] = t;
  return p;
}

template <int d>
CsrMatrix nodal_pattern(const Mesh<d>& mesh, const NodeLayout<d>& nodes) {
  std::vector<std::vector<int>> rows(nodes.size());
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const auto idx = nodes.element_nodes(e);
    for (int i : idx) rows[std::size_t(i)].insert(rows[std::size_t(i)].end(), idx.begin(), idx.end());
  }
  std::vector<std::size_t> ptr(rows.size() + 1, 0);
  std::vector<int> col;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    rows[i].erase(std::unique(rows[i].begin(), rows[i].end()), rows[i].end());
    ptr[i + 1] = ptr[i] + rows[i].size();
    col.insert(col.end(), rows[i].begin(), rows[i].end());
  }
  return CsrMatrix(nodes.size(), nodes.size(), std::move(ptr), std::move(col));
}

} // namespace detail

/// Marches the spatial restriction of a space-time problem from t = 0 to T
/// on a uniform d-dimensional mesh.
template <int d>
TimeMarchResult<d> crank_nicolson(const ProblemSpec<d + 1>& problem, const TimeMarchConfig& cfg) {
  cfg.validate();
  problem.validate();
  constexpr int D = d + 1;
  SpaceTimeDomain<d> space{};
  for (int a = 0; a < d; ++a) space.extent[a] = problem.domain.extent[a];
  const double t0 = problem.domain.extent[D - 1].lower, T = problem.domain.extent[D - 1].upper;
  const int steps = cfg.step_count();
  const double dt = (T - t0) / steps;

  auto mesh = std::make_shared<const Mesh<d>>(uniform_mesh(space, cfg.level));
  auto nodes = std::make_shared<const NodeLayout<d>>(*mesh, cfg.degree);
  const std::size_t nn = nodes->size();

  std::vector<char> boundary(nn, 0);
  std::vector<int> free_index(nn, -1);
  std::vector<int> free_nodes;
  for (std::size_t n = 0; n < nn; ++n) {
    for (int a = 0; a < d; ++a)
      if (nodes->on_box_face(int(n), a, false) || nodes->on_box_face(int(n), a, true)) boundary[n] = 1;
    if (!boundary[n]) {
      free_index[n] = int(free_nodes.size());
      free_nodes.push_back(int(n));
    }
  }

  // mass and stiffness over all nodes
  CsrMatrix mass = detail::nodal_pattern(*mesh, *nodes);
  CsrMatrix stiff = mass;
  const auto rule = gauss_rule<d>(quadrature_points_for(cfg.degree));
  const Tabulation<d> tab(nodes->basis(), rule.points);
  const int nb = nodes->nodes_per_element();
  for (std::size_t e = 0; e < mesh->size(); ++e) {
    const auto& el = mesh->element(e);
    const auto s = mesh->size(el);
    const double vol = mesh->volume(el);
    const auto idx = nodes->element_nodes(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto x = mesh->map(el, rule.points[q]);
      const auto adv = problem.advection(detail::space_time_point<d>(x, t0));
      const double w = rule.weights[q] * vol;
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) {
          double conv = 0.0, diff = 0.0;
          for (int a = 0; a < d; ++a) {
            const double gj = tab.grad(q, j, a) / s[a];
            conv += adv[a] * gj;
            diff += gj * tab.grad(q, i, a) / s[a];
          }
          mass.add(idx[i], idx[j], w * tab.value(q, i) * tab.value(q, j));
          stiff.add(idx[i], idx[j], w * (conv * tab.value(q, i) + problem.nu * diff));
        }
    }
  }

  auto load = [&](double t) {
    std::vector<double> f(nn, 0.0);
    for (std::size_t e = 0; e < mesh->size(); ++e) {
      const auto& el = mesh->element(e);
      const double vol = mesh->volume(el);
      const auto idx = nodes->element_nodes(e);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double fx = problem.forcing(detail::space_time_point<d>(mesh->map(el, rule.points[q]), t));
        if (fx == 0.0) continue;
        for (int i = 0; i < nb; ++i) f[std::size_t(idx[i])] += rule.weights[q] * vol * fx * tab.value(q, i);
      }
    }
    return f;
  };

  // left operator restricted to free rows; columns split into free and boundary parts
  std::vector<std::size_t> ptr{0};
  std::vector<int> col;
  for (int n : free_nodes) {
    for (std::size_t p = mass.row_ptr()[n]; p < mass.row_ptr()[n + 1]; ++p)
      if (free_index[mass.col_idx()[p]] >= 0) col.push_back(free_index[mass.col_idx()[p]]);
    ptr.push_back(col.size());
  }
  CsrMatrix lhs(free_nodes.size(), free_nodes.size(), std::move(ptr), std::move(col));
  auto left = [&](std::size_t p) { return mass.values()[p] / dt + 0.5 * stiff.values()[p]; };
  for (std::size_t r = 0; r < free_nodes.size(); ++r) {
    const int n = free_nodes[r];
    for (std::size_t p = mass.row_ptr()[n]; p < mass.row_ptr()[n + 1]; ++p) {
      const int c = free_index[mass.col_idx()[p]];
      if (c >= 0) lhs.add(r, std::size_t(c), left(p));
    }
  }

  std::vector<double> u(nn);
  for (std::size_t n = 0; n < nn; ++n) u[n] = problem.initial_u0(detail::space_time_point<d>(nodes->position(int(n)), t0));

  TimeMarchResult<d> out{FieldFunction<d>(mesh, nodes, u), {}, dt, steps, 0};
  std::vector<int> snap_steps;
  for (double ts : cfg.snapshot_times) {
    if (ts < t0 - 1e-12 || ts > T + 1e-12) throw PreconditionError("snapshot time outside the time interval");
    snap_steps.push_back(int(std::lround((ts - t0) / dt)));
  }
  auto record = [&](int step) {
    for (std::size_t i = 0; i < snap_steps.size(); ++i)
      if (snap_steps[i] == step) out.snapshots.push_back({t0 + step * dt, step, FieldFunction<d>(mesh, nodes, u)});
  };
  record(0);

  std::vector<double> f_old = load(t0), f_new, rhs(free_nodes.size()), unew(nn);
  for (int step = 1; step <= steps; ++step) {
    const double t = t0 + step * dt;
    f_new = load(t);
    for (std::size_t n = 0; n < nn; ++n)
      unew[n] = boundary[n] ? problem.dirichlet_g(detail::space_time_point<d>(nodes->position(int(n)), t)) : 0.0;
    for (std::size_t r = 0; r < free_nodes.size(); ++r) {
      const int n = free_nodes[r];
      double s = 0.5 * (f_old[n] + f_new[n]);
      for (std::size_t p = mass.row_ptr()[n]; p < mass.row_ptr()[n + 1]; ++p) {
        const int c = mass.col_idx()[p];
        s += (mass.values()[p] / dt - 0.5 * stiff.values()[p]) * u[c];
        if (boundary[c]) s -= left(p) * unew[c];
      }
      rhs[r] = s;
    }
    auto [x, rep] = solve(lhs, rhs, cfg.solver);
    out.iterations += rep.iterations;
    if (!rep.converged)
      throw SolverError("Crank-Nicolson step " + std::to_string(step) + " did not converge (residual " +
                        std::to_string(rep.residual) + ")");
    for (std::size_t r = 0; r < free_nodes.size(); ++r) unew[free_nodes[r]] = x[r];
    std::swap(u, unew);
    std::swap(f_old, f_new);
    record(step);
  }
  out.final_field = FieldFunction<d>(mesh, nodes, u);
  return out;
}

} // namespace stgls
