// Acceptance run: one PASS/FAIL line per criterion, preceded by the individual
// measurements behind it. Exits 0 once every criterion has been evaluated;
// with --strict it exits 1 if any criterion failed.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <random>

#include "support.hpp"

using namespace stgls;
using stgls::testing::manufactured;
using stgls::testing::random_balanced_mesh;

namespace {

struct Criterion {
  int number;
  std::string title;
  bool ok = true;
  int checks = 0, missed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Criterion(int n, std::string t) : number(n), title(std::move(t)) {}

  bool check(bool pass, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    std::printf("    %-4s %s\n", pass ? "ok" : "MISS", buf);
    ++checks;
    if (!pass) {
      ok = false;
      ++missed;
    }
    return pass;
  }
  void note(const std::string& s) const { std::printf("    .    %s\n", s.c_str()); }
};

int failures = 0;

void verdict(const Criterion& c) {
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - c.start).count();
  if (!c.ok) ++failures;
  std::printf("%s [%d] %s (%d/%d checks, %.1f s)\n\n", c.ok ? "PASS" : "FAIL", c.number, c.title.c_str(),
              c.checks - c.missed, c.checks, secs);
  std::fflush(stdout);
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

struct Target {
  double value, tol;
};

/// Expected slopes of one convergence case; a missing target is not checked.
struct RateTargets {
  std::optional<Target> err_l2, err_h, eta;
};

template <int D>
void rate_case(Criterion& c, const std::string& problem, double nu, int k, int lo, int hi, const RateTargets& t) {
  ProblemOptions opt;
  opt.nu = nu;
  const auto rows = convergence_study(make_problem<D>(problem, opt), k, lo, hi);
  const auto s = slopes(rows);
  char tag[128];
  std::snprintf(tag, sizeof tag, "d=%d %-11s nu=%-5g k=%d levels %d-%d", D - 1, problem.c_str(), nu, k, lo, hi);
  const auto one = [&](const char* what, double v, const std::optional<Target>& tg) {
    if (tg)
      c.check(within(v, tg->value, tg->tol), "%s  %-6s slope %.3f  (target %.1f +- %.2f)", tag, what, v, tg->value,
              tg->tol);
  };
  one("err_l2", s.err_l2, t.err_l2);
  one("err_h", s.err_h, t.err_h);
  one("eta", s.eta, t.eta);
}

/// u = 1 + x + 2y - t + xyt: trilinear, so it lies in every discrete space.
ExactSolution<3> trilinear() {
  ExactSolution<3> ex;
  ex.value = [](const Point<3>& p) { return 1 + p[0] + 2 * p[1] - p[2] + p[0] * p[1] * p[2]; };
  ex.time_derivative = [](const Point<3>& p) { return -1 + p[0] * p[1]; };
  ex.spatial_gradient = [](const Point<3>& p) { return SpatialVector<3>{1 + p[1] * p[2], 2 + p[0] * p[2]}; };
  ex.spatial_laplacian = [](const Point<3>&) { return 0.0; };
  return ex;
}

/// u = x^2 t + y; needs k >= 2 in x.
ExactSolution<3> quadratic() {
  ExactSolution<3> ex;
  ex.value = [](const Point<3>& p) { return p[0] * p[0] * p[2] + p[1]; };
  ex.time_derivative = [](const Point<3>& p) { return p[0] * p[0]; };
  ex.spatial_gradient = [](const Point<3>& p) { return SpatialVector<3>{2 * p[0] * p[2], 1.0}; };
  ex.spatial_laplacian = [](const Point<3>& p) { return 2 * p[2]; };
  return ex;
}

template <int D>
double max_nodal_error(const FieldFunction<D>& u, const ExactSolution<D>& ex) {
  double err = 0.0;
  for (std::size_t n = 0; n < u.nodes().size(); ++n)
    err = std::max(err, std::abs(u.coefficients()[n] - ex.value(u.nodes().position(int(n)))));
  return err;
}

SolveConfig tight() {
  SolveConfig s;
  s.rel_tol = 1e-13;
  return s;
}

void convergence_rates() {
  Criterion c(1, "convergence rates");
  for (double nu : {1e-2, 1e-6}) {
    const bool low = nu < 1e-3;
    const RateTargets heat{Target{2.0, 0.25}, low ? Target{2.0, 0.3} : Target{1.0, 0.3},
                           low ? Target{2.0, 0.3} : Target{1.0, 0.3}};
    // advection-dominated error in the V_h norm drops like h^{3/2}; the moderate case has the
    // estimator slope read off the published plot
    const RateTargets adv{Target{2.0, 0.25}, low ? Target{1.5, 0.3} : Target{1.0, 0.3},
                          low ? Target{2.0, 0.3} : Target{1.3, 0.3}};
    rate_case<2>(c, "heat_mms", nu, 1, 3, 6, heat);
    rate_case<2>(c, "advdiff_mms", nu, 1, 3, 6, adv);
    rate_case<3>(c, "heat_mms", nu, 1, 3, 5, heat);
    rate_case<3>(c, "advdiff_mms", nu, 1, 3, 5, adv);
  }
  for (double nu : {1e-6, 1e-8})
    rate_case<2>(c, "advdiff_mms", nu, 2, 3, 6, {Target{3.0, 0.3}, Target{2.5, 0.4}, std::nullopt});
  rate_case<2>(c, "advdiff_mms", 1e-6, 3, 3, 6, {Target{4.0, 0.4}, std::nullopt, std::nullopt});
  verdict(c);
}

void coercivity() {
  Criterion c(2, "coercivity identity, rotating field");
  auto pb = make_rotating_gaussian(1e-3, {1.0 / 3, 1.0 / 3}, 0.05);
  auto mesh = std::make_shared<const Mesh<3>>(random_balanced_mesh<3>(21, 2, 2, 0.25));
  auto [sys, dofs] = assemble(mesh, pb, 1);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(dofs.n_free());
  double worst = 0.0;
  bool positive = true;
  for (int trial = 0; trial < 50; ++trial) {
    for (auto& x : v) x = u(rng);
    const double bvv = dot(v, sys.matrix * std::span<const double>(v));
    FieldFunction<3> field(mesh, dofs.layout_ptr(), dofs.expand_homogeneous(v));
    const auto np = norm_parts<3>(field, pb, GlsParams{}, nullptr);
    const double rhs = 0.5 * np.gamma_t_sq + pb.nu * np.grad_sq + np.stab_sq;
    positive = positive && bvv > 0.0;
    worst = std::max(worst, std::abs(bvv - rhs) / bvv);
  }
  c.note(std::to_string(mesh->size()) + " elements, " + std::to_string(dofs.n_free()) + " free dofs, hanging nodes present");
  c.check(positive, "b_h(v,v) > 0 for all 50 fields");
  c.check(worst <= 1e-10, "max relative defect %.2e  (limit 1e-10)", worst);
  verdict(c);
}

void consistency() {
  Criterion c(3, "in-space solutions reproduced");
  const auto tri = trilinear();
  for (unsigned seed : {1u, 2u, 3u}) {
    auto mesh = std::make_shared<const Mesh<3>>(random_balanced_mesh<3>(seed, 1, 2, 0.3));
    for (int k : {1, 2, 3}) {
      const double err = max_nodal_error(solve_problem(mesh, manufactured<3>(tri, 0.05, {0.3, -0.2}), k, {}, tight()).field, tri);
      c.check(err <= 1e-9, "trilinear, hanging mesh %u, k=%d: max nodal error %.2e", seed, k, err);
    }
  }
  const auto quad = quadratic();
  auto mesh = std::make_shared<const Mesh<3>>(random_balanced_mesh<3>(3, 1, 2, 0.3));
  const double err = max_nodal_error(solve_problem(mesh, manufactured<3>(quad, 0.5, {1.0, 0.5}), 2, {}, tight()).field, quad);
  c.check(err <= 1e-9, "x^2 t + y, k=2: max nodal error %.2e", err);
  verdict(c);
}

void estimator_reliability() {
  Criterion c(4, "estimator reliability");
  for (double nu : {1e-2, 1e-6}) {
    auto pb = make_heat_mms<2>(nu);
    std::vector<double> eff;
    for (int level = 3; level <= 6; ++level) {
      auto mesh = std::make_shared<const Mesh<2>>(uniform_mesh(pb.domain, level));
      auto sol = solve_problem(mesh, pb, 1);
      eff.push_back(*estimate(sol.field, pb).effectivity);
    }
    auto sorted = eff;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[1] + sorted[2]);
    const double spread = std::max(sorted.back() / median, median / sorted.front());
    c.check(spread < 10.0, "heat_mms d=1 nu=%g levels 3-6: effectivity %.3f %.3f %.3f %.3f, max ratio to median %.2f",
            nu, eff[0], eff[1], eff[2], eff[3], spread);
  }
  const auto tri = trilinear();
  auto pb = manufactured<3>(tri, 0.02, {0.5, 1.0});
  auto mesh = std::make_shared<const Mesh<3>>(random_balanced_mesh<3>(7, 1, 2, 0.3));
  const double eta = estimate(solve_problem(mesh, pb, 1, {}, tight()).field, pb).eta;
  c.check(eta <= 1e-8, "exact solution in V_h: eta = %.2e  (limit 1e-8)", eta);
  verdict(c);
}

/// -d log(err) / d log(dof), least squares.
double dof_slope(const std::vector<double>& dof, const std::vector<double>& err) { return -loglog_slope(dof, err); }

void adaptive_runs() {
  const auto begin = std::chrono::steady_clock::now();
  auto pb = make_gaussian_source<3>();
  std::vector<double> udof, uerr;
  for (int level = 3; level <= 5; ++level) {
    auto mesh = std::make_shared<const Mesh<3>>(uniform_mesh(pb.domain, level));
    auto sol = solve_problem(mesh, pb, 1);
    udof.push_back(double(sol.n_free));
    uerr.push_back(error_norms(sol.field, pb).err_l2);
  }
  AdaptConfig cfg;
  cfg.eta_tol = 3e-4;
  cfg.max_rounds = 8;
  cfg.max_level = 7;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = adapt_loop(pb, 1, uniform_mesh(pb.domain, 3), cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& rounds = res.trace.rounds;

  {
    Criterion c(5, "adaptive efficiency, gaussian_source d=2");
    c.start = begin;
    char buf[160];
    for (std::size_t i = 0; i < udof.size(); ++i) {
      std::snprintf(buf, sizeof buf, "uniform level %zu: dof %.0f  err_l2 %.4e", i + 3, udof[i], uerr[i]);
      c.note(buf);
    }
    std::vector<double> adof, aerr;
    for (const auto& r : rounds) {
      std::snprintf(buf, sizeof buf, "adaptive round %d: dof %zu  err_l2 %.4e  eta %.4e", r.round, r.dof, *r.err_l2, r.eta);
      c.note(buf);
      adof.push_back(double(r.dof));
      aerr.push_back(*r.err_l2);
    }
    std::snprintf(buf, sizeof buf, "stopped: %s after %.1f s", to_string(res.trace.reason), secs);
    c.note(buf);
    const double target = uerr.back();
    std::optional<std::size_t> first;
    for (std::size_t i = 0; i < rounds.size() && !first; ++i)
      if (aerr[i] <= target) first = i;
    if (c.check(first.has_value(), "adaptive trace reaches the uniform level-5 error %.4e", target))
      c.check(adof[*first] <= 0.6 * udof.back(), "first such round uses %.0f dofs = %.1f%% of %.0f  (limit 60%%)",
              adof[*first], 100 * adof[*first] / udof.back(), udof.back());
    const double su = dof_slope(udof, uerr), sa = dof_slope(adof, aerr);
    c.check(sa > su, "dof-error slope adaptive %.3f > uniform %.3f", sa, su);
    verdict(c);
  }
  {
    Criterion c(6, "AMR structural invariants");
    bool balanced = true;
    double defect = 0.0;
    for (const auto& r : rounds) {
      balanced = balanced && r.balanced;
      defect = std::max(defect, r.hanging_weight_defect);
    }
    c.check(balanced, "2:1 balance after all %zu rounds", rounds.size());
    c.check(defect <= 1e-12, "max |sum of hanging weights - 1| = %.1e", defect);
    c.check(rounds.back().h_ratio >= 8.0, "final h_max/h_min = %g  (at least 8)", rounds.back().h_ratio);
    verdict(c);
  }
}

void dispersion() {
  Criterion c(7, "dispersion against Crank-Nicolson, rotating Gaussian level 6");
  const auto pb = make_problem<3>("rotating_gaussian");
  const auto cmp = compare_with_crank_nicolson(pb, 6);
  double diff0 = 0.0;
  for (std::size_t i = 0; i < cmp.space_time.t0.size(); ++i)
    diff0 = std::max(diff0, std::abs(cmp.space_time.t0[i].second - cmp.crank_nicolson.t0[i].second));
  char buf[200];
  std::snprintf(buf, sizeof buf, "h = %.5f, space-time %zu dofs in %.1f s, Crank-Nicolson %.1f s", cmp.h,
                cmp.space_time_dof, cmp.seconds_space_time, cmp.seconds_cn);
  c.note(buf);
  c.check(diff0 <= 1e-10, "t=0 profiles agree: max difference %.1e", diff0);
  const auto& st = cmp.space_time;
  const auto& cn = cmp.crank_nicolson;
  c.check(st.displacement <= 1.5 * cmp.h, "space-time peak displacement %.5f <= 1.5h = %.5f", st.displacement, 1.5 * cmp.h);
  c.check(cn.displacement > st.displacement, "Crank-Nicolson displacement %.5f > space-time %.5f", cn.displacement,
          st.displacement);
  const double rel = std::abs(st.peak1.value - cn.peak1.value) / std::max(st.peak1.value, cn.peak1.value);
  c.check(rel <= 0.15, "t=1 peak heights %.4f vs %.4f differ by %.1f%%  (limit 15%%)", st.peak1.value, cn.peak1.value,
          100 * rel);
  verdict(c);
}

void conditioning() {
  Criterion c(8, "stabilization improves conditioning");
  ProblemOptions opt;
  opt.nu = 1e-6;
  const auto cc = condition_comparison(make_problem<3>("advdiff_mms", opt), 3, 1);
  c.check(cc.stabilized.kappa < cc.unstabilized.kappa,
          "advdiff_mms d=2 nu=1e-6 h=1/8 k=1 (%zu dofs): kappa %.2f stabilized < %.2f plain", cc.dof,
          cc.stabilized.kappa, cc.unstabilized.kappa);
  const auto c1 = condition_comparison(make_problem<2>("advdiff_mms", opt), 3, 1);
  c.check(c1.stabilized.kappa < c1.unstabilized.kappa, "same in d=1 (%zu dofs): kappa %.2f stabilized < %.2f plain",
          c1.dof, c1.stabilized.kappa, c1.unstabilized.kappa);
  verdict(c);
}

} // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  try {
    convergence_rates();
    coercivity();
    consistency();
    estimator_reliability();
    adaptive_runs();
    dispersion();
    conditioning();
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 2;
  }
  std::printf("N/A  [9] runs at the 128^3 scale are out of scope; criteria 5-7 cover the same effects at levels 5-7\n\n");
  std::printf("%d of 8 criteria failed\n", failures);
  return strict && failures > 0 ? 1 : 0;
}
