#pragma once

// Benchmark problems for the advection-diffusion equation
//   u_t + a . grad u - nu Lap u = f   on U x (0, T],
//   u = g on the lateral boundary, u = u0 at t = 0.
// Points are space-time points (x_1, ..., x_d, t).

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

#include "mesh.hpp"

namespace stgls {

template <int D>
using SpatialVector = std::array<double, D - 1>;

template <int D>
using ScalarFunction = std::function<double(const Point<D>&)>;

template <int D>
struct ExactSolution {
  ScalarFunction<D> value;
  ScalarFunction<D> time_derivative;
  std::function<SpatialVector<D>(const Point<D>&)> spatial_gradient;
  ScalarFunction<D> spatial_laplacian;
};

template <int D>
struct ProblemSpec {
  std::string name;
  double nu = 1.0;
  std::function<SpatialVector<D>(const Point<D>&)> advection;
  bool divergence_free = true;
  ScalarFunction<D> forcing;
  ScalarFunction<D> dirichlet_g;  ///< lateral boundary data
  ScalarFunction<D> initial_u0;   ///< data on t = 0 (time component ignored)
  std::optional<ExactSolution<D>> exact;
  SpaceTimeDomain<D> domain{};

  void validate() const {
    if (!(nu > 0.0)) throw PreconditionError("diffusivity must be positive");
    if (!advection || !forcing || !dirichlet_g || !initial_u0)
      throw PreconditionError("problem '" + name + "' is missing a coefficient callback");
  }

  /// |(a, 1)|: magnitude of the space-time advection with unit speed in time.
  double space_time_speed(const Point<D>& p) const {
    const auto a = advection(p);
    double s = 1.0;
    for (double c : a) s += c * c;
    return std::sqrt(s);
  }
};

namespace detail {

constexpr double two_pi = 2.0 * std::numbers::pi;

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw PreconditionError(std::string(what) + " must be positive");
}

/// exp(-t) prod_i sin(2 pi x_i) with all derivatives.
template <int D>
ExactSolution<D> decaying_sine_mode() {
  constexpr int d = D - 1;
  auto sines = [](const Point<D>& p) {
    double s = 1.0;
    for (int i = 0; i < d; ++i) s *= std::sin(two_pi * p[i]);
    return s;
  };
  ExactSolution<D> ex;
  ex.value = [sines](const Point<D>& p) { return std::exp(-p[D - 1]) * sines(p); };
  ex.time_derivative = [sines](const Point<D>& p) { return -std::exp(-p[D - 1]) * sines(p); };
  ex.spatial_gradient = [](const Point<D>& p) {
    SpatialVector<D> g{};
    for (int i = 0; i < d; ++i) {
      double v = two_pi * std::cos(two_pi * p[i]);
      for (int j = 0; j < d; ++j)
        if (j != i) v *= std::sin(two_pi * p[j]);
      g[i] = std::exp(-p[D - 1]) * v;
    }
    return g;
  };
  ex.spatial_laplacian = [sines](const Point<D>& p) {
    return -double(d) * two_pi * two_pi * std::exp(-p[D - 1]) * sines(p);
  };
  return ex;
}

/// Rigid rotation about (1/2, 1/2) with unit revolution per unit time.
inline SpatialVector<3> rotating_field(const Point<3>& p) {
  return {-two_pi * (p[1] - 0.5), two_pi * (p[0] - 0.5)};
}

template <int D>
ProblemSpec<D> manufactured(std::string name, double nu, std::function<SpatialVector<D>(const Point<D>&)> adv,
                            ExactSolution<D> ex) {
  ProblemSpec<D> p;
  p.name = std::move(name);
  p.nu = nu;
  p.advection = adv;
  p.divergence_free = true;
  p.forcing = [nu, adv, ex](const Point<D>& x) {
    const auto a = adv(x);
    const auto g = ex.spatial_gradient(x);
    double convective = 0.0;
    for (int i = 0; i < D - 1; ++i) convective += a[i] * g[i];
    return ex.time_derivative(x) + convective - nu * ex.spatial_laplacian(x);
  };
  p.dirichlet_g = ex.value;
  p.initial_u0 = ex.value;
  p.exact = std::move(ex);
  return p;
}

} // namespace detail

/// Heat equation with u = exp(-t) prod sin(2 pi x_i) (zero on the lateral boundary).
template <int D>
ProblemSpec<D> make_heat_mms(double nu) {
  static_assert(D == 2 || D == 3);
  detail::require_positive(nu, "nu");
  return detail::manufactured<D>("heat_mms", nu, [](const Point<D>&) { return SpatialVector<D>{}; },
                                 detail::decaying_sine_mode<D>());
}

/// Advection-diffusion with the same manufactured solution. In two space
/// dimensions the field is the rigid rotation about the box center; in one
/// space dimension it is the constant unit velocity.
template <int D>
ProblemSpec<D> make_advdiff_mms(double nu) {
  static_assert(D == 2 || D == 3);
  detail::require_positive(nu, "nu");
  std::function<SpatialVector<D>(const Point<D>&)> adv;
  if constexpr (D == 3)
    adv = detail::rotating_field;
  else
    adv = [](const Point<D>&) { return SpatialVector<D>{1.0}; };
  return detail::manufactured<D>("advdiff_mms", nu, adv, detail::decaying_sine_mode<D>());
}

/// Gaussian pulse exp(-|x - c|^2 / width^2) carried by the rotating field, f = 0, g = 0.
inline ProblemSpec<3> make_rotating_gaussian(double nu = 1e-4, std::array<double, 2> center = {1.0 / 3, 1.0 / 3},
                                             double width = 0.05) {
  detail::require_positive(nu, "nu");
  detail::require_positive(width, "pulse width");
  ProblemSpec<3> p;
  p.name = "rotating_gaussian";
  p.nu = nu;
  p.advection = detail::rotating_field;
  p.forcing = [](const Point<3>&) { return 0.0; };
  p.dirichlet_g = [](const Point<3>&) { return 0.0; };
  p.initial_u0 = [center, width](const Point<3>& x) {
    const double rx = x[0] - center[0], ry = x[1] - center[1];
    return std::exp(-(rx * rx + ry * ry) / (width * width));
  };
  return p;
}

/// Indicator of the disc |x - c| < sigma carried by the rotating field.
inline ProblemSpec<3> make_rotating_disc(double nu = 1e-8, std::array<double, 2> center = {1.0 / 3, 1.0 / 3},
                                         double sigma = 0.1) {
  detail::require_positive(nu, "nu");
  detail::require_positive(sigma, "disc radius");
  ProblemSpec<3> p;
  p.name = "rotating_disc";
  p.nu = nu;
  p.advection = detail::rotating_field;
  p.forcing = [](const Point<3>&) { return 0.0; };
  p.dirichlet_g = [](const Point<3>&) { return 0.0; };
  p.initial_u0 = [center, sigma](const Point<3>& x) {
    const double rx = (x[0] - center[0]) / sigma, ry = (x[1] - center[1]) / sigma;
    return rx * rx + ry * ry < 1.0 ? 1.0 : 0.0;
  };
  return p;
}

/// Heat equation with the self-similar source term that keeps a Gaussian
/// pulse of fixed width centered in U while its amplitude decays as exp(-2t/theta).
template <int D>
ProblemSpec<D> make_gaussian_source(double nu = 0.01, double width = 0.05, double theta = 1.0) {
  static_assert(D == 2 || D == 3);
  detail::require_positive(nu, "nu");
  detail::require_positive(width, "pulse width");
  detail::require_positive(theta, "theta");
  constexpr int d = D - 1;
  const double w2 = width * width;
  auto r2 = [](const Point<D>& x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (x[i] - 0.5) * (x[i] - 0.5);
    return s;
  };
  ExactSolution<D> ex;
  ex.value = [=](const Point<D>& x) { return std::exp(-2.0 * x[D - 1] / theta - r2(x) / w2); };
  ex.time_derivative = [=](const Point<D>& x) { return -2.0 / theta * std::exp(-2.0 * x[D - 1] / theta - r2(x) / w2); };
  ex.spatial_gradient = [=](const Point<D>& x) {
    const double u = std::exp(-2.0 * x[D - 1] / theta - r2(x) / w2);
    SpatialVector<D> g{};
    for (int i = 0; i < d; ++i) g[i] = -2.0 * (x[i] - 0.5) / w2 * u;
    return g;
  };
  ex.spatial_laplacian = [=](const Point<D>& x) {
    const double u = std::exp(-2.0 * x[D - 1] / theta - r2(x) / w2);
    return (4.0 * r2(x) / (w2 * w2) - 2.0 * d / w2) * u;
  };
  ProblemSpec<D> p;
  p.name = "gaussian_source";
  p.nu = nu;
  p.advection = [](const Point<D>&) { return SpatialVector<D>{}; };
  // f = -[2/theta + nu (4/w^4)(r^2 - d w^2/2)] u; in two space dimensions this is
  // -[2/theta + nu (4/w^4)(r^2 - w^2)] u.
  p.forcing = [=](const Point<D>& x) {
    const double rr = r2(x);
    return -(2.0 / theta + nu * (4.0 / (w2 * w2)) * (rr - 0.5 * d * w2)) *
           std::exp(-2.0 * x[D - 1] / theta - rr / w2);
  };
  p.dirichlet_g = ex.value;
  p.initial_u0 = ex.value;
  p.exact = std::move(ex);
  return p;
}

inline const std::array<const char*, 5>& problem_names() {
  static const std::array<const char*, 5> names{"heat_mms", "advdiff_mms", "rotating_gaussian", "rotating_disc",
                                                 "gaussian_source"};
  return names;
}

struct ProblemOptions {
  std::optional<double> nu;
  double width = 0.05;   ///< Gaussian pulse width d
  double sigma = 0.1;    ///< disc radius scale
  double theta = 1.0;    ///< time scale of the heat source
};

/// Looks up a problem by name. Names that need two space dimensions are rejected for D == 2.
template <int D>
ProblemSpec<D> make_problem(const std::string& name, const ProblemOptions& opt = {}) {
  if (name == "heat_mms") return make_heat_mms<D>(opt.nu.value_or(1e-2));
  if (name == "advdiff_mms") return make_advdiff_mms<D>(opt.nu.value_or(1e-2));
  if (name == "gaussian_source") return make_gaussian_source<D>(opt.nu.value_or(0.01), opt.width, opt.theta);
  if (name == "rotating_gaussian" || name == "rotating_disc") {
    if constexpr (D == 3) {
      if (name == "rotating_gaussian") return make_rotating_gaussian(opt.nu.value_or(1e-4), {1.0 / 3, 1.0 / 3}, opt.width);
      return make_rotating_disc(opt.nu.value_or(1e-8), {1.0 / 3, 1.0 / 3}, opt.sigma);
    } else {
      throw PreconditionError("problem '" + name + "' requires two space dimensions");
    }
  }
  throw PreconditionError("unknown problem '" + name + "'");
}

} // namespace stgls
