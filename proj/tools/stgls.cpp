// stgls: space-time advection-diffusion experiments from the command line.
//
//   stgls solve      --problem heat_mms --dim 1 --level 4
//   stgls converge   --problem advdiff_mms --nu 1e-6 --level-min 3 --level-max 6
//   stgls adapt      --problem gaussian_source --dim 2 --level 3 --eta-tol 3e-4
//   stgls compare-cn --problem rotating_gaussian --dim 2 --level 6
//   stgls condition  --problem advdiff_mms --nu 1e-6 --dim 2 --level 3
//
// Every option may also come from a flat key=value file given with --config;
// flags on the command line win.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "stgls/stgls.hpp"

namespace {

using namespace stgls;

struct RunConfig {
  std::string problem = "heat_mms";
  int dim = 1;
  int degree = 1;
  std::optional<double> nu;
  double width = 0.05;
  double sigma = 0.1;
  double theta = 1.0;
  int level = 4;
  int level_min = 3;
  int level_max = 6;
  bool no_gls = false;
  GlsParams gls{};
  std::string method = "bicgstab";
  std::string precond = "jacobi";
  double rtol = 1e-10;
  std::optional<std::size_t> max_iters;
  int restart = 50;
  std::string output_dir = ".";
  // adapt
  double eta_tol = 1e-3;
  int max_rounds = 10;
  int max_level = 12;
  std::string marking = "threshold";
  double fraction = 0.5;
  // compare-cn
  int samples = 801;
  std::optional<int> steps;
  std::vector<double> seg_start, seg_end;
  // condition
  int iterations = 200;

  SolveConfig solver() const {
    SolveConfig s;
    s.method = method == "gmres" ? KrylovMethod::gmres : KrylovMethod::bicgstab;
    s.preconditioner = precond == "none"    ? PreconditionerKind::none
                       : precond == "jacobi" ? PreconditionerKind::jacobi
                                             : PreconditionerKind::block_jacobi;
    s.rel_tol = rtol;
    s.max_iters = max_iters;
    s.restart = restart;
    return s;
  }
  GlsParams stabilization() const {
    GlsParams g = gls;
    g.enabled = !no_gls;
    return g;
  }
  std::string path(const std::string& name) const { return (std::filesystem::path(output_dir) / name).string(); }
};

template <int D>
ProblemSpec<D> problem_of(const RunConfig& c) {
  ProblemOptions opt;
  opt.nu = c.nu;
  opt.width = c.width;
  opt.sigma = c.sigma;
  opt.theta = c.theta;
  return make_problem<D>(c.problem, opt);
}

void write_file(const std::string& path, const auto& writer) {
  auto f = open_output(path);
  writer(f);
  if (!f) throw Error("write to '" + path + "' failed");
}

template <int D>
int cmd_solve(const RunConfig& c) {
  const auto pb = problem_of<D>(c);
  auto mesh = std::make_shared<const Mesh<D>>(uniform_mesh(pb.domain, c.level));
  const auto gls = c.stabilization();
  auto sol = solve_problem(mesh, pb, c.degree, gls, c.solver());
  const auto est = estimate(sol.field, pb, gls);
  write_file(c.path("solution.vtk"), [&](std::ostream& os) { write_vtk(os, sol.field, pb.name); });
  std::printf("problem %s  level %d  k %d  dof %zu  iterations %zu  eta %.6e\n", pb.name.c_str(), c.level,
              c.degree, sol.n_free, sol.report.iterations, est.eta);
  if (pb.exact) {
    const auto err = error_norms(sol.field, pb, gls);
    write_file(c.path("errors.csv"),
               [&](std::ostream& os) { write_error_csv(os, mesh->h_max(), sol.n_free, err, est.eta); });
    std::printf("err_l2 %.6e  err_h %.6e  err_h_star %.6e\n", err.err_l2, err.err_h, err.err_h_star);
  }
  return 0;
}

template <int D>
int cmd_converge(const RunConfig& c) {
  if (c.level_max - c.level_min < 2) throw PreconditionError("a convergence study needs at least three levels");
  const auto pb = problem_of<D>(c);
  const auto rows = convergence_study(pb, c.degree, c.level_min, c.level_max, c.stabilization(), c.solver());
  write_file(c.path("convergence.csv"), [&](std::ostream& os) { write_convergence_csv(os, rows); });
  std::printf("%5s %12s %9s %12s %12s %12s\n", "level", "h", "dof", "eta", "err_h", "err_l2");
  for (const auto& r : rows)
    std::printf("%5d %12.5e %9zu %12.5e %12.5e %12.5e\n", r.level, r.h, r.dof, r.eta, r.err_h, r.err_l2);
  const auto s = slopes(rows);
  std::printf("slope eta %.3f  err_h %.3f  err_l2 %.3f\n", s.eta, s.err_h, s.err_l2);
  return 0;
}

template <int D>
int cmd_adapt(const RunConfig& c) {
  const auto pb = problem_of<D>(c);
  AdaptConfig cfg;
  cfg.eta_tol = c.eta_tol;
  cfg.max_rounds = c.max_rounds;
  cfg.max_level = c.max_level;
  cfg.marking = c.marking == "threshold" ? Marking::threshold : Marking::fixed_fraction;
  cfg.theta = c.fraction;
  const auto print = [](const AdaptTrace& t) {
    for (const auto& r : t.rounds)
      std::printf("round %d  elements %zu  dof %zu  eta %.5e  max level %d  h ratio %g\n", r.round, r.elements,
                  r.dof, r.eta, r.max_level, r.h_ratio);
  };
  try {
    auto res = adapt_loop(pb, c.degree, uniform_mesh(pb.domain, c.level), cfg, c.stabilization(), c.solver());
    write_file(c.path("trace.csv"), [&](std::ostream& os) { write_trace_csv(os, res.trace); });
    write_file(c.path("mesh.vtk"), [&](std::ostream& os) { write_vtk(os, res.field, pb.name); });
    print(res.trace);
    std::printf("stopped: %s\n", to_string(res.trace.reason));
  } catch (const AdaptAborted& e) {
    write_file(c.path("trace.csv"), [&](std::ostream& os) { write_trace_csv(os, e.trace); });
    print(e.trace);
    throw;
  }
  return 0;
}

int cmd_compare_cn(const RunConfig& c) {
  const auto pb = problem_of<3>(c);
  Segment2 seg = default_ab_segment();
  if (!c.seg_start.empty() || !c.seg_end.empty()) {
    if (c.seg_start.size() != 2 || c.seg_end.size() != 2)
      throw PreconditionError("--segment-start and --segment-end take two coordinates each");
    seg = {{c.seg_start[0], c.seg_start[1]}, {c.seg_end[0], c.seg_end[1]}};
  }
  if (c.samples < 2) throw PreconditionError("a profile needs at least two samples");
  const auto cmp = compare_with_crank_nicolson(pb, c.level, c.degree, seg, c.samples, c.stabilization(), c.solver());
  const double t0 = pb.domain.extent[2].lower, t1 = pb.domain.extent[2].upper;
  const auto name = [&](const char* method, double t) {
    return c.path(std::string(method) + "_profile_t_" + format_double(t) + ".csv");
  };
  const auto emit = [&](const char* method, const MethodProfiles& m) {
    write_file(name(method, t0), [&](std::ostream& os) { write_profile_csv(os, m.t0); });
    write_file(name(method, t1), [&](std::ostream& os) { write_profile_csv(os, m.t1); });
    std::printf("%-14s peak t0 at %.5f (%.5f)  peak t1 at %.5f (%.5f)  displacement %.5f\n", method,
                m.peak0.arc, m.peak0.value, m.peak1.arc, m.peak1.value, m.displacement);
  };
  std::printf("level %d  h %.5f  segment (%g, %g) - (%g, %g)\n", cmp.level, cmp.h, seg.start[0], seg.start[1],
              seg.end[0], seg.end[1]);
  emit("spacetime", cmp.space_time);
  emit("cn", cmp.crank_nicolson);
  return 0;
}

template <int D>
int cmd_condition(const RunConfig& c) {
  const auto pb = problem_of<D>(c);
  GlsParams gls = c.gls;
  const auto cc = condition_comparison(pb, c.level, c.degree, gls, c.iterations);
  write_file(c.path("condition.csv"), [&](std::ostream& os) {
    os << "dof,kappa_stabilized,kappa_unstabilized\n"
       << cc.dof << ',' << format_double(cc.stabilized.kappa) << ',' << format_double(cc.unstabilized.kappa) << '\n';
  });
  std::printf("dof %zu  kappa stabilized %.4e  unstabilized %.4e\n", cc.dof, cc.stabilized.kappa,
              cc.unstabilized.kappa);
  return 0;
}

template <int D>
int dispatch(const std::string& cmd, const RunConfig& c) {
  if (cmd == "solve") return cmd_solve<D>(c);
  if (cmd == "converge") return cmd_converge<D>(c);
  if (cmd == "adapt") return cmd_adapt<D>(c);
  if (cmd == "condition") return cmd_condition<D>(c);
  if constexpr (D == 3) return cmd_compare_cn(c);
  throw PreconditionError("compare-cn needs --dim 2");
}

} // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Space-time GLS solver for the advection-diffusion equation"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value file; command-line flags take precedence");
  app.allow_config_extras(false);

  const CLI::Validator positive_or_inf(
      [](std::string& s) {
        double v = 0.0;
        return CLI::detail::lexical_cast(s, v) && v > 0.0 ? std::string{} : "must be positive or inf";
      },
      "POSITIVE|inf");
  std::vector<std::string> names(problem_names().begin(), problem_names().end());
  app.add_option("--problem", c.problem, "benchmark problem")->check(CLI::IsMember(names))->capture_default_str();
  app.add_option("--dim", c.dim, "space dimension")->check(CLI::IsMember({1, 2}))->capture_default_str();
  app.add_option("-k,--degree", c.degree, "polynomial degree")->check(CLI::Range(1, 3))->capture_default_str();
  app.add_option("--nu", c.nu, "diffusivity (problem default if omitted)")->check(CLI::PositiveNumber);
  app.add_option("--width", c.width, "Gaussian pulse width")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--sigma", c.sigma, "disc radius scale")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--theta", c.theta, "time scale of the heat source")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--level", c.level, "uniform refinement level")->check(CLI::Range(0, 10))->capture_default_str();
  app.add_option("--level-min", c.level_min, "first level of a sweep")->check(CLI::Range(0, 10))->capture_default_str();
  app.add_option("--level-max", c.level_max, "last level of a sweep")->check(CLI::Range(0, 10))->capture_default_str();
  app.add_flag("--no-gls", c.no_gls, "plain Galerkin, no stabilization");
  app.add_option("--c1", c.gls.c1, "diffusive stabilization constant")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--c2", c.gls.c2, "advective stabilization constant")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--method", c.method)->check(CLI::IsMember({"bicgstab", "gmres"}))->capture_default_str();
  app.add_option("--precond", c.precond)->check(CLI::IsMember({"none", "jacobi", "block-jacobi"}))->capture_default_str();
  app.add_option("--rtol", c.rtol, "relative residual tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--max-iters", c.max_iters, "Krylov iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--restart", c.restart, "GMRES restart length")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("-o,--output-dir", c.output_dir, "directory for CSV and VTK output")
      ->check(CLI::ExistingDirectory)
      ->capture_default_str();
  app.add_option("--eta-tol", c.eta_tol, "refine elements with eta_K above this; inf solves once")
      ->check(positive_or_inf)->capture_default_str();
  app.add_option("--max-rounds", c.max_rounds)->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--max-level", c.max_level)->check(CLI::Range(0, 20))->capture_default_str();
  app.add_option("--marking", c.marking)->check(CLI::IsMember({"threshold", "fixed-fraction"}))->capture_default_str();
  app.add_option("--fraction", c.fraction, "bulk fraction for fixed-fraction marking")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app.add_option("--samples", c.samples, "points per profile")->capture_default_str();
  app.add_option("--segment-start", c.seg_start, "profile start x,y")->delimiter(',')->expected(2);
  app.add_option("--segment-end", c.seg_end, "profile end x,y")->delimiter(',')->expected(2);
  app.add_option("--iterations", c.iterations, "power iteration count")->check(CLI::PositiveNumber)->capture_default_str();

  app.add_subcommand("solve", "solve once and write the field and its errors");
  app.add_subcommand("converge", "uniform refinement sweep with log-log slopes");
  app.add_subcommand("adapt", "residual-driven adaptive refinement");
  app.add_subcommand("compare-cn", "profiles of the space-time and Crank-Nicolson solutions");
  app.add_subcommand("condition", "condition estimates with and without stabilization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return c.dim == 1 ? dispatch<2>(cmd, c) : dispatch<3>(cmd, c);
  } catch (const PreconditionError& e) {
    std::cerr << "stgls " << cmd << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "stgls " << cmd << ": " << e.what() << "\n";
    return 1;
  }
}
