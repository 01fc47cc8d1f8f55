#pragma once

// Galerkin/least-squares discretization of the space-time advection-diffusion
// operator M u = u_t + a . grad u - nu Lap u on a hanging-node mesh:
//
//   b_h(u, v) = sum_K (M_1 u, v)_K + (nu grad u, grad v)_K + eps_K (M u, M v)_K
//   l_h(v)    = sum_K (f, v)_K + eps_K (f, M v)_K
//
// where M_1 = d/dt + a . grad and gradients are spatial.

#include <memory>

#include "dofs.hpp"
#include "linsolve.hpp"
#include "problem.hpp"

namespace stgls {

struct GlsParams {
  double c1 = 4.0;
  double c2 = 2.0;
  bool enabled = true;

  void validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw PreconditionError("stabilization constants must be positive");
  }
};

/// eps_K = 1 / (c1 nu / h^2 + c2 |a~| / h), or 0 with stabilization disabled.
inline double gls_parameter(double h, double nu, double a_tilde_mag, const GlsParams& params = {}) {
  if (!(h > 0.0)) throw DomainError("element size must be positive");
  if (!params.enabled) return 0.0;
  return 1.0 / (params.c1 * nu / (h * h) + params.c2 * a_tilde_mag / h);
}

/// Shape functions with physical derivatives at the quadrature points of one element.
template <int D>
class ElementValues {
public:
  ElementValues(const TensorBasis<D>& basis, int points_per_axis)
      : rule_(gauss_rule<D>(points_per_axis)), tab_(basis, rule_.points), nb_(basis.size()) {
    x_.resize(rule_.size());
    jxw_.resize(rule_.size());
    grad_.resize(rule_.size() * nb_ * D);
    lap_.resize(rule_.size() * nb_);
  }

  void reinit(const Mesh<D>& mesh, const Element<D>& e) {
    const auto s = mesh.size(e);
    const double vol = mesh.volume(e);
    for (std::size_t q = 0; q < rule_.size(); ++q) {
      x_[q] = mesh.map(e, rule_.points[q]);
      jxw_[q] = rule_.weights[q] * vol;
      for (int i = 0; i < nb_; ++i) {
        double lap = 0.0;
        for (int a = 0; a < D; ++a) {
          grad_[(q * nb_ + i) * D + a] = tab_.grad(q, i, a) / s[a];
          if (a < D - 1) lap += tab_.d2(q, i, a) / (s[a] * s[a]);
        }
        lap_[q * nb_ + i] = lap;
      }
    }
  }

  std::size_t n_points() const { return rule_.size(); }
  int n_basis() const { return nb_; }
  const Point<D>& point(std::size_t q) const { return x_[q]; }
  const Point<D>& reference_point(std::size_t q) const { return rule_.points[q]; }
  double JxW(std::size_t q) const { return jxw_[q]; }
  double value(std::size_t q, int i) const { return tab_.value(q, i); }
  double grad(std::size_t q, int i, int a) const { return grad_[(q * nb_ + i) * D + a]; }
  /// Sum of the pure second derivatives along the spatial axes (all axes but the last).
  double spatial_laplacian(std::size_t q, int i) const { return lap_[q * nb_ + i]; }

private:
  QuadratureRule<D> rule_;
  Tabulation<D> tab_;
  int nb_;
  std::vector<Point<D>> x_;
  std::vector<double> jxw_;
  std::vector<double> grad_;
  std::vector<double> lap_;
};

/// eps_K of element e, with |a~| the largest |(a, 1)| over the element quadrature points.
template <int D>
double element_stabilization(const Mesh<D>& mesh, const Element<D>& e, const ProblemSpec<D>& problem,
                             const ElementValues<D>& ev, const GlsParams& gls) {
  if (!gls.enabled) return 0.0;
  double amax = 1.0;
  for (std::size_t q = 0; q < ev.n_points(); ++q) amax = std::max(amax, problem.space_time_speed(ev.point(q)));
  return gls_parameter(mesh.h(e), problem.nu, amax, gls);
}

/// Dirichlet data of a space-time node: u0 on t = lower (including its
/// intersection with the lateral boundary), g on the lateral boundary.
template <int D>
std::optional<double> space_time_dirichlet(const NodeLayout<D>& nodes, const ProblemSpec<D>& problem, int n) {
  const auto& x = nodes.position(n);
  if (nodes.on_box_face(n, D - 1, false)) return problem.initial_u0(x);
  for (int a = 0; a < D - 1; ++a)
    if (nodes.on_box_face(n, a, false) || nodes.on_box_face(n, a, true)) return problem.dirichlet_g(x);
  return std::nullopt;
}

template <int D>
DofMap<D> make_dof_map(std::shared_ptr<const NodeLayout<D>> nodes, const ProblemSpec<D>& problem) {
  const NodeLayout<D>* raw = nodes.get();
  return DofMap<D>(std::move(nodes), [raw, &problem](int n) { return space_time_dirichlet(*raw, problem, n); });
}

namespace detail {

/// Sparsity of the condensed operator: free dofs coupled through any element.
template <int D>
CsrMatrix condensed_pattern(const Mesh<D>& mesh, const DofMap<D>& dofs) {
  const auto& nodes = dofs.layout();
  std::vector<std::vector<int>> rows(dofs.n_free());
  std::vector<int> local;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    local.clear();
    for (int n : nodes.element_nodes(e))
      for (int d : dofs.terms_dofs(n)) local.push_back(d);
    std::sort(local.begin(), local.end());
    local.erase(std::unique(local.begin(), local.end()), local.end());
    for (int i : local) rows[std::size_t(i)].insert(rows[std::size_t(i)].end(), local.begin(), local.end());
  }
  std::vector<std::size_t> ptr(rows.size() + 1, 0);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  for (std::size_t i = 0; i < rows.size(); ++i) ptr[i + 1] = ptr[i] + rows[i].size();
  std::vector<int> col;
  col.reserve(ptr.back());
  for (auto& r : rows) {
    col.insert(col.end(), r.begin(), r.end());
    std::vector<int>().swap(r);
  }
  return CsrMatrix(dofs.n_free(), dofs.n_free(), std::move(ptr), std::move(col));
}

/// Adds a local matrix and load vector through the constraint expansions.
template <int D>
void scatter(const DofMap<D>& dofs, std::span<const int> local_nodes, std::span<const double> aloc,
             std::span<const double> bloc, CsrMatrix& a, std::vector<double>& rhs, std::vector<double>& lifting) {
  const std::size_t nb = local_nodes.size();
  for (std::size_t i = 0; i < nb; ++i) {
    const auto di = dofs.terms_dofs(local_nodes[i]);
    const auto wi = dofs.terms_weights(local_nodes[i]);
    for (std::size_t ti = 0; ti < di.size(); ++ti) {
      const std::size_t row = std::size_t(di[ti]);
      rhs[row] += wi[ti] * bloc[i];
      for (std::size_t j = 0; j < nb; ++j) {
        const double v = wi[ti] * aloc[i * nb + j];
        if (v == 0.0) continue;
        const double c = dofs.constant(local_nodes[j]);
        if (c != 0.0) {
          rhs[row] -= v * c;
          lifting[row] += v * c;
        }
        const auto dj = dofs.terms_dofs(local_nodes[j]);
        const auto wj = dofs.terms_weights(local_nodes[j]);
        for (std::size_t tj = 0; tj < dj.size(); ++tj) a.add(row, dj[tj], v * wj[tj]);
      }
    }
  }
}

} // namespace detail

/// Element matrix (row = test i, column = trial j) and load of the GLS forms.
template <int D>
void gls_element(const ProblemSpec<D>& problem, const ElementValues<D>& ev, double eps, std::vector<double>& aloc,
                 std::vector<double>& bloc) {
  const int nb = ev.n_basis();
  aloc.assign(std::size_t(nb) * nb, 0.0);
  bloc.assign(nb, 0.0);
  std::vector<double> m1(nb), mop(nb);
  const double nu = problem.nu;
  for (std::size_t q = 0; q < ev.n_points(); ++q) {
    const auto& x = ev.point(q);
    const auto adv = problem.advection(x);
    const double f = problem.forcing(x);
    const double w = ev.JxW(q);
    for (int i = 0; i < nb; ++i) {
      double t = ev.grad(q, i, D - 1);
      for (int a = 0; a < D - 1; ++a) t += adv[a] * ev.grad(q, i, a);
      m1[i] = t;
      mop[i] = t - nu * ev.spatial_laplacian(q, i);
    }
    for (int i = 0; i < nb; ++i) {
      const double vi = ev.value(q, i);
      bloc[i] += w * f * (vi + eps * mop[i]);
      for (int j = 0; j < nb; ++j) {
        double g = 0.0;
        for (int a = 0; a < D - 1; ++a) g += ev.grad(q, i, a) * ev.grad(q, j, a);
        aloc[std::size_t(i) * nb + j] += w * (m1[j] * vi + nu * g + eps * mop[j] * mop[i]);
      }
    }
  }
}

/// Assembles the condensed GLS system over the free degrees of freedom.
template <int D>
std::pair<DiscreteSystem, DofMap<D>> assemble(std::shared_ptr<const Mesh<D>> mesh, const ProblemSpec<D>& problem,
                                              int degree, const GlsParams& gls = {}) {
  static_assert(D >= 2, "space-time assembly needs at least one spatial axis");
  check_degree(degree);
  gls.validate();
  problem.validate();
  if (!mesh->is_balanced()) throw PreconditionError("assemble requires a 2:1 balanced mesh");
  auto nodes = std::make_shared<const NodeLayout<D>>(*mesh, degree);
  DofMap<D> dofs = make_dof_map<D>(nodes, problem);

  DiscreteSystem sys;
  sys.matrix = detail::condensed_pattern(*mesh, dofs);
  sys.rhs.assign(dofs.n_free(), 0.0);
  sys.lifting.assign(dofs.n_free(), 0.0);

  ElementValues<D> ev(nodes->basis(), quadrature_points_for(degree));
  std::vector<double> aloc, bloc;
  for (std::size_t e = 0; e < mesh->size(); ++e) {
    const auto& el = mesh->element(e);
    ev.reinit(*mesh, el);
    const double eps = element_stabilization(*mesh, el, problem, ev, gls);
    gls_element(problem, ev, eps, aloc, bloc);
    detail::scatter(dofs, nodes->element_nodes(e), aloc, bloc, sys.matrix, sys.rhs, sys.lifting);
  }
  return {std::move(sys), std::move(dofs)};
}

template <int D>
std::pair<DiscreteSystem, DofMap<D>> assemble(const Mesh<D>& mesh, const ProblemSpec<D>& problem, int degree,
                                              const GlsParams& gls = {}) {
  return assemble(std::make_shared<const Mesh<D>>(mesh), problem, degree, gls);
}

template <int D>
struct Solution {
  FieldFunction<D> field;
  SolveReport report;
  std::size_t n_free = 0;
};

/// Assemble, solve and expand. Throws SolverError if the solve does not converge.
template <int D>
Solution<D> solve_problem(std::shared_ptr<const Mesh<D>> mesh, const ProblemSpec<D>& problem, int degree,
                          const GlsParams& gls = {}, const SolveConfig& cfg = {}) {
  auto [sys, dofs] = assemble(mesh, problem, degree, gls);
  auto [x, rep] = solve(sys, cfg);
  if (!rep.converged)
    throw SolverError("linear solve did not converge (" + std::to_string(rep.iterations) +
                      " iterations, residual " + std::to_string(rep.residual) + ")");
  return Solution<D>{make_field(mesh, dofs, x), rep, dofs.n_free()};
}

} // namespace stgls
