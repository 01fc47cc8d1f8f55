#pragma once

// Residual a posteriori indicator
//   eta_K^2 = h_K^2 ||r||_K^2 + 1/2 sum_{E in dK} h_E ||j||_E^2,
//   r = f - M u_h,  j = -nu [[n . grad u_h]] on interior faces with a spatial normal,
// and the error norms ||e||_{L2}, ||e||_{V_h}, ||e||_{V_h*}.

#include <cmath>
#include <optional>

#include "assembly.hpp"

namespace stgls {

/// Tensor Gauss rule on the reference face {xi_axis = side} of [0,1]^D; weights sum to 1.
template <int D>
QuadratureRule<D> face_rule(int q, int axis, double side) {
  const auto line = gauss_legendre(q);
  QuadratureRule<D> rule;
  const int n = int(ipow(q, D - 1));
  for (int i = 0; i < n; ++i) {
    Point<D> p{};
    double w = 1.0;
    int r = i;
    for (int a = 0; a < D; ++a) {
      if (a == axis) {
        p[a] = side;
        continue;
      }
      const int j = r % q;
      r /= q;
      p[a] = line.points[j];
      w *= line.weights[j];
    }
    rule.points.push_back(p);
    rule.weights.push_back(w);
  }
  return rule;
}

namespace detail {

/// u_h and its derivatives at the quadrature points of the current element.
template <int D>
struct LocalJet {
  double value = 0.0;
  Point<D> grad{};
  double lap = 0.0;  ///< spatial Laplacian
};

template <int D>
LocalJet<D> jet(const ElementValues<D>& ev, std::size_t q, std::span<const double> coeffs, std::span<const int> idx) {
  LocalJet<D> j;
  for (int i = 0; i < ev.n_basis(); ++i) {
    const double c = coeffs[idx[i]];
    j.value += c * ev.value(q, i);
    for (int a = 0; a < D; ++a) j.grad[a] += c * ev.grad(q, i, a);
    j.lap += c * ev.spatial_laplacian(q, i);
  }
  return j;
}

template <int D>
double apply_operator(const ProblemSpec<D>& pb, const Point<D>& x, double u_t, const SpatialVector<D>& grad,
                      double lap) {
  const auto a = pb.advection(x);
  double m = u_t - pb.nu * lap;
  for (int i = 0; i < D - 1; ++i) m += a[i] * grad[i];
  return m;
}

template <int D>
bool touches_final_time(const Element<D>& e) {
  return e.coords[D - 1] == (std::int64_t{1} << e.level) - 1;
}

} // namespace detail

/// r = f - (u_t + a . grad u_h - nu Lap u_h) at the element quadrature points.
template <int D>
std::vector<double> element_residual(const FieldFunction<D>& u, const ProblemSpec<D>& pb, std::size_t e) {
  const auto& mesh = u.mesh();
  ElementValues<D> ev(u.nodes().basis(), quadrature_points_for(u.degree()));
  ev.reinit(mesh, mesh.element(e));
  const auto idx = u.nodes().element_nodes(e);
  std::vector<double> r(ev.n_points());
  for (std::size_t q = 0; q < ev.n_points(); ++q) {
    const auto j = detail::jet(ev, q, u.coefficients(), idx);
    SpatialVector<D> g{};
    for (int a = 0; a < D - 1; ++a) g[a] = j.grad[a];
    r[q] = pb.forcing(ev.point(q)) - detail::apply_operator<D>(pb, ev.point(q), j.grad[D - 1], g, j.lap);
  }
  return r;
}

/// Flux jump on a face, sampled on every (sub-)face shared by the owner and one neighbor.
template <int D>
struct FaceJump {
  std::vector<Point<D>> points;
  std::vector<double> weights;  ///< physical quadrature weights
  std::vector<double> values;   ///< j = -nu (grad u_owner - grad u_neighbor) . n, n = orientation e_axis
  std::vector<std::size_t> neighbor;  ///< neighbor leaf index of each point
  std::vector<double> h_e;            ///< size of the sub-face of each point (finer side)
};

/// Jump of the normal flux across `face`. Faces on the box boundary and faces
/// normal to the time axis have a zero jump.
template <int D>
FaceJump<D> face_jump(const FieldFunction<D>& u, double nu, const Face& face, int q = 0) {
  const auto& mesh = u.mesh();
  if (q <= 0) q = quadrature_points_for(u.degree());
  FaceJump<D> out;
  const auto& owner = mesh.element(face.owner_index);
  const bool zero = face.is_boundary() || face.axis == D - 1;
  std::vector<std::size_t> partners = face.neighbor_indices;
  if (partners.empty()) partners.push_back(face.owner_index);
  const int L = mesh.max_level();
  const auto& dom = mesh.domain();
  for (std::size_t nb : partners) {
    const auto& other = mesh.element(nb);
    // shared patch in lattice units of the finest level
    IntPoint<D> lo{}, hi{};
    for (int a = 0; a < D; ++a) {
      const std::int64_t so = std::int64_t{1} << (L - owner.level), sn = std::int64_t{1} << (L - other.level);
      lo[a] = std::max(owner.coords[a] * so, other.coords[a] * sn);
      hi[a] = std::min((owner.coords[a] + 1) * so, (other.coords[a] + 1) * sn);
    }
    if (face.is_boundary()) {
      const std::int64_t so = std::int64_t{1} << (L - owner.level);
      lo[face.axis] = hi[face.axis] = face.orientation > 0 ? (owner.coords[face.axis] + 1) * so : owner.coords[face.axis] * so;
    }
    const auto rule = face_rule<D>(q, face.axis, 0.0);
    const double n = std::ldexp(1.0, L);
    Point<D> x0{}, len{};
    double area = 1.0;
    for (int a = 0; a < D; ++a) {
      x0[a] = dom.extent[a].lower + dom.extent[a].length() * double(lo[a]) / n;
      len[a] = dom.extent[a].length() * double(hi[a] - lo[a]) / n;
      if (a != face.axis) area *= len[a];
    }
    const double he = std::min(mesh.h(owner), mesh.h(other));
    for (std::size_t k = 0; k < rule.size(); ++k) {
      Point<D> x{};
      for (int a = 0; a < D; ++a) x[a] = x0[a] + len[a] * rule.points[k][a];
      double j = 0.0;
      if (!zero) {
        const auto go = u.gradient_on(face.owner_index, mesh.to_reference(owner, x));
        const auto gn = u.gradient_on(nb, mesh.to_reference(other, x));
        j = -nu * (go[face.axis] - gn[face.axis]) * double(face.orientation);
      }
      out.points.push_back(x);
      out.weights.push_back(rule.weights[k] * area);
      out.values.push_back(j);
      out.neighbor.push_back(nb);
      out.h_e.push_back(he);
    }
  }
  return out;
}

/// Squared norm pieces of e = u_h - u_ref (u_ref = 0 when `ref` is null).
struct NormParts {
  double l2_sq = 0.0;
  double gamma_t_sq = 0.0;  ///< ||e||^2 on t = T
  double grad_sq = 0.0;     ///< ||grad_x e||^2 (without nu)
  double stab_sq = 0.0;     ///< sum_K eps_K ||M e||_K^2
  double dt_sq = 0.0;       ///< ||e_t||^2
};

template <int D>
NormParts norm_parts(const FieldFunction<D>& u, const ProblemSpec<D>& pb, const GlsParams& gls,
                     const ExactSolution<D>* ref) {
  const auto& mesh = u.mesh();
  const auto& nodes = u.nodes();
  const int q = quadrature_points_for(u.degree());
  ElementValues<D> ev(nodes.basis(), q);
  const auto top = face_rule<D>(q, D - 1, 1.0);
  NormParts np;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const auto& el = mesh.element(e);
    ev.reinit(mesh, el);
    const double eps = element_stabilization(mesh, el, pb, ev, gls);
    const auto idx = nodes.element_nodes(e);
    for (std::size_t k = 0; k < ev.n_points(); ++k) {
      const auto& x = ev.point(k);
      const auto j = detail::jet(ev, k, u.coefficients(), idx);
      double e_val = j.value, et = j.grad[D - 1], lap = j.lap;
      SpatialVector<D> g{};
      for (int a = 0; a < D - 1; ++a) g[a] = j.grad[a];
      if (ref) {
        e_val -= ref->value(x);
        et -= ref->time_derivative(x);
        lap -= ref->spatial_laplacian(x);
        const auto gr = ref->spatial_gradient(x);
        for (int a = 0; a < D - 1; ++a) g[a] -= gr[a];
      }
      double gg = 0.0;
      for (int a = 0; a < D - 1; ++a) gg += g[a] * g[a];
      const double me = detail::apply_operator<D>(pb, x, et, g, lap);
      const double w = ev.JxW(k);
      np.l2_sq += w * e_val * e_val;
      np.grad_sq += w * gg;
      np.stab_sq += w * eps * me * me;
      np.dt_sq += w * et * et;
    }
    if (detail::touches_final_time(el)) {
      const auto s = mesh.size(el);
      double area = 1.0;
      for (int a = 0; a < D - 1; ++a) area *= s[a];
      for (std::size_t k = 0; k < top.size(); ++k) {
        double v = u.value_on(e, top.points[k]);
        if (ref) v -= ref->value(mesh.map(el, top.points[k]));
        np.gamma_t_sq += top.weights[k] * area * v * v;
      }
    }
  }
  return np;
}

struct ErrorReport {
  double err_l2 = 0.0;
  double err_h = 0.0;       ///< V_h norm
  double err_h_star = 0.0;  ///< V_h* norm (adds ||e_t||)
  double err_gamma_t = 0.0;
};

inline ErrorReport make_error_report(const NormParts& np, double nu) {
  ErrorReport r;
  r.err_l2 = std::sqrt(np.l2_sq);
  const double vh = np.gamma_t_sq + nu * np.grad_sq + np.stab_sq;
  r.err_h = std::sqrt(vh);
  r.err_h_star = std::sqrt(vh + np.dt_sq);
  r.err_gamma_t = std::sqrt(np.gamma_t_sq);
  return r;
}

/// Norms of u_h - u for a problem with an exact solution.
template <int D>
ErrorReport error_norms(const FieldFunction<D>& u, const ProblemSpec<D>& pb, const GlsParams& gls = {}) {
  if (!pb.exact) throw UnsupportedError("problem '" + pb.name + "' has no exact solution");
  return make_error_report(norm_parts(u, pb, gls, &*pb.exact), pb.nu);
}

struct EstimatorReport {
  std::vector<double> eta_k;
  std::vector<double> residual_part;  ///< h_K^2 ||r||_K^2
  std::vector<double> jump_part;      ///< 1/2 sum_E h_E ||j||_E^2
  double eta = 0.0;
  std::optional<double> effectivity;  ///< eta / ||e||_{V_h*}
};

template <int D>
EstimatorReport estimate(const FieldFunction<D>& u, const ProblemSpec<D>& pb, const GlsParams& gls = {}) {
  const auto& mesh = u.mesh();
  const auto& nodes = u.nodes();
  if (!mesh.is_balanced()) throw PreconditionError("estimate requires a 2:1 balanced mesh");
  EstimatorReport rep;
  rep.residual_part.assign(mesh.size(), 0.0);
  rep.jump_part.assign(mesh.size(), 0.0);
  ElementValues<D> ev(nodes.basis(), quadrature_points_for(u.degree()));
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const auto& el = mesh.element(e);
    ev.reinit(mesh, el);
    const auto idx = nodes.element_nodes(e);
    double rr = 0.0;
    for (std::size_t q = 0; q < ev.n_points(); ++q) {
      const auto j = detail::jet(ev, q, u.coefficients(), idx);
      SpatialVector<D> g{};
      for (int a = 0; a < D - 1; ++a) g[a] = j.grad[a];
      const double r = pb.forcing(ev.point(q)) - detail::apply_operator<D>(pb, ev.point(q), j.grad[D - 1], g, j.lap);
      rr += ev.JxW(q) * r * r;
    }
    const double h = mesh.h(el);
    rep.residual_part[e] = h * h * rr;
  }
  for (const auto& f : enumerate_faces(mesh)) {
    if (f.is_boundary() || f.axis == D - 1) continue;
    const auto fj = face_jump(u, pb.nu, f);
    for (std::size_t k = 0; k < fj.values.size(); ++k) {
      const double c = 0.5 * fj.h_e[k] * fj.weights[k] * fj.values[k] * fj.values[k];
      rep.jump_part[f.owner_index] += c;
      rep.jump_part[fj.neighbor[k]] += c;
    }
  }
  rep.eta_k.resize(mesh.size());
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.size(); ++e) {
    const double s = rep.residual_part[e] + rep.jump_part[e];
    rep.eta_k[e] = std::sqrt(s);
    sum += s;
  }
  rep.eta = std::sqrt(sum);
  if (pb.exact) {
    const double err = error_norms(u, pb, gls).err_h_star;
    if (err > 0.0) rep.effectivity = rep.eta / err;
  }
  return rep;
}

/// Uniform samples along a segment. Arc length is measured in the spatial
/// coordinates: all axes but the last for space-time fields, every axis when
/// `last_axis_is_time` is false.
template <int D>
std::vector<std::pair<double, double>> sample_profile(const FieldFunction<D>& u, const Point<D>& start,
                                                      const Point<D>& end, int n_samples,
                                                      bool last_axis_is_time = true) {
  if (n_samples < 2) throw PreconditionError("a profile needs at least two samples");
  const auto& dom = u.mesh().domain();
  if (!dom.contains(start) || !dom.contains(end)) throw DomainError("profile segment leaves the domain");
  double len = 0.0;
  const int spatial = last_axis_is_time ? D - 1 : D;
  for (int a = 0; a < spatial; ++a) len += (end[a] - start[a]) * (end[a] - start[a]);
  len = std::sqrt(len);
  std::vector<std::pair<double, double>> out;
  out.reserve(std::size_t(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double s = double(i) / (n_samples - 1);
    Point<D> p{};
    for (int a = 0; a < D; ++a) p[a] = std::lerp(start[a], end[a], s);
    out.emplace_back(s * len, u.evaluate(p));
  }
  return out;
}

} // namespace stgls
