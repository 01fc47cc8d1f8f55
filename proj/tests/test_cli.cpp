#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

using namespace stgls;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test.
class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("stgls_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  int run(const std::string& args, const fs::path& out) const {
    const std::string cmd = std::string(STGLS_CLI_PATH) + " " + args + " --output-dir " + out.string() + " > " +
                            (dir / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  int run(const std::string& args) const { return run(args, dir); }

  std::string read(const fs::path& p) const {
    std::ifstream f(p);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }
  std::string output() const { return read(dir / "stdout.txt"); }

  /// Column `name` of the last data row.
  double last_value(const fs::path& csv, const std::string& name) const {
    std::istringstream in(read(csv));
    std::string header, line, last;
    std::getline(in, header);
    while (std::getline(in, line))
      if (!line.empty()) last = line;
    std::istringstream h(header), r(last);
    std::string key, val;
    while (std::getline(h, key, ',')) {
      std::getline(r, val, ',');
      if (key == name) return std::stod(val);
    }
    ADD_FAILURE() << "no column " << name << " in " << csv;
    return 0.0;
  }

  fs::path dir;
};

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::size_t line_count(const std::string& s) {
  return std::size_t(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(mant(rng), ex(rng));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
}

TEST(Io, CsvHeaders) {
  std::ostringstream a, b, c;
  write_profile_csv(a, {{0.0, 1.0}});
  write_convergence_csv(b, {});
  write_trace_csv(c, AdaptTrace{});
  EXPECT_EQ(a.str(), "arc_length,u\n0,1\n");
  EXPECT_EQ(b.str(), "h,eta,err_h,err_l2\n");
  EXPECT_EQ(c.str(), "round,dof,eta,err_l2\n");
}

TEST(Io, TraceLeavesMissingErrorEmpty) {
  AdaptTrace t;
  t.rounds.push_back(AdaptRound{});
  t.rounds[0].dof = 12;
  t.rounds[0].eta = 0.25;
  std::ostringstream os;
  write_trace_csv(os, t);
  EXPECT_EQ(os.str(), "round,dof,eta,err_l2\n0,12,0.25,\n");
}

TEST(Io, VtkOfAHangingMesh) {
  auto m = uniform_mesh(unit_domain<2>(), 1);
  m = refine(m, std::vector<ElementId>{m.element(0).id});
  auto mesh = std::make_shared<const Mesh<2>>(m);
  const auto f = interpolate_nodal<2>([](const Point<2>& p) { return p[0] + 2 * p[1]; }, mesh, 2);
  std::ostringstream os;
  write_vtk(os, f);
  const std::string s = os.str();
  // vertices: 3x3 of the coarse grid plus 5 new ones in the refined quarter
  EXPECT_NE(s.find("POINTS 14 double"), std::string::npos);
  EXPECT_NE(s.find("CELLS 7 35"), std::string::npos);
  EXPECT_NE(s.find("CELL_TYPES 7\n9\n"), std::string::npos);
  EXPECT_NE(s.find("SCALARS level int 1"), std::string::npos);
  EXPECT_NE(s.find("POINT_DATA 14"), std::string::npos);

  auto m3 = std::make_shared<const Mesh<3>>(uniform_mesh(unit_domain<3>(), 1));
  std::ostringstream os3;
  write_vtk(os3, interpolate_nodal<3>([](const Point<3>&) { return 1.0; }, m3, 1));
  EXPECT_NE(os3.str().find("CELL_TYPES 8\n12\n"), std::string::npos);
  EXPECT_NE(os3.str().find("POINTS 27 double"), std::string::npos);
}

TEST_F(Cli, SolveWritesFieldAndErrors) {
  ASSERT_EQ(run("solve --problem heat_mms --dim 1 --level 4"), 0) << output();
  EXPECT_TRUE(fs::exists(dir / "solution.vtk"));
  ASSERT_TRUE(fs::exists(dir / "errors.csv"));
  EXPECT_EQ(first_line(read(dir / "errors.csv")), "h,dof,eta,err_h,err_h_star,err_l2");
  EXPECT_EQ(line_count(read(dir / "errors.csv")), 2u);
}

TEST_F(Cli, SolveWithoutExactSolutionSkipsErrors) {
  ASSERT_EQ(run("solve --problem rotating_disc --dim 2 --level 2"), 0) << output();
  EXPECT_TRUE(fs::exists(dir / "solution.vtk"));
  EXPECT_FALSE(fs::exists(dir / "errors.csv"));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("solve --problem no_such_problem"), 2);
  EXPECT_NE(output().find("no_such_problem"), std::string::npos);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("solve --dim 3"), 2);
  EXPECT_EQ(run("solve --level -1"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("solve --problem rotating_gaussian --dim 1"), 2);
  EXPECT_EQ(run("compare-cn --dim 1"), 2);
  EXPECT_EQ(run("converge --level-min 3 --level-max 4"), 2);
  EXPECT_EQ(run("solve --level 2", dir / "missing"), 2);
}

TEST_F(Cli, RuntimeFailureExitsOne) {
  EXPECT_EQ(run("solve --problem advdiff_mms --dim 2 --level 3 --precond none --max-iters 1"), 1);
  EXPECT_NE(output().find("solve"), std::string::npos);
}

TEST_F(Cli, QuadraticRefinementReducesTheError) {
  fs::create_directories(dir / "l4");
  fs::create_directories(dir / "l5");
  ASSERT_EQ(run("solve --problem heat_mms --nu 1e-2 --degree 2 --level 4", dir / "l4"), 0) << output();
  ASSERT_EQ(run("solve --problem heat_mms --nu 1e-2 --degree 2 --level 5", dir / "l5"), 0) << output();
  EXPECT_LT(last_value(dir / "l5" / "errors.csv", "err_l2"), last_value(dir / "l4" / "errors.csv", "err_l2"));
}

TEST_F(Cli, ConvergeCsvAndSlopes) {
  ASSERT_EQ(run("converge --problem heat_mms --nu 1e-2 --level-min 3 --level-max 6"), 0) << output();
  const auto csv = read(dir / "convergence.csv");
  EXPECT_EQ(first_line(csv), "h,eta,err_h,err_l2");
  EXPECT_EQ(line_count(csv), 5u);
  EXPECT_NE(output().find("slope eta"), std::string::npos);
  EXPECT_NEAR(last_value(dir / "convergence.csv", "h"), 1.0 / 64, 1e-15);
}

TEST_F(Cli, IdenticalRunsGiveIdenticalFiles) {
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  const std::string args = "converge --problem advdiff_mms --nu 1e-6 --level-min 2 --level-max 4 --degree 2";
  ASSERT_EQ(run(args, dir / "a"), 0);
  ASSERT_EQ(run(args, dir / "b"), 0);
  EXPECT_EQ(read(dir / "a" / "convergence.csv"), read(dir / "b" / "convergence.csv"));
  const std::string adapt = "adapt --problem gaussian_source --level 2 --eta-tol 1e-3 --max-rounds 3";
  ASSERT_EQ(run(adapt, dir / "a"), 0);
  ASSERT_EQ(run(adapt, dir / "b"), 0);
  EXPECT_EQ(read(dir / "a" / "trace.csv"), read(dir / "b" / "trace.csv"));
  EXPECT_EQ(read(dir / "a" / "mesh.vtk"), read(dir / "b" / "mesh.vtk"));
}

TEST_F(Cli, AdaptInfiniteToleranceIsOneRound) {
  ASSERT_EQ(run("adapt --problem gaussian_source --level 3 --eta-tol inf"), 0) << output();
  const auto csv = read(dir / "trace.csv");
  EXPECT_EQ(first_line(csv), "round,dof,eta,err_l2");
  EXPECT_EQ(line_count(csv), 2u);
  EXPECT_TRUE(fs::exists(dir / "mesh.vtk"));
}

TEST_F(Cli, AdaptTraceHasOneRowPerRound) {
  ASSERT_EQ(run("adapt --problem gaussian_source --level 2 --eta-tol 1e-12 --max-rounds 3"), 0) << output();
  EXPECT_EQ(line_count(read(dir / "trace.csv")), 5u);
  EXPECT_NE(output().find("stopped: max_rounds"), std::string::npos);
  EXPECT_NE(output().find("round 3"), std::string::npos);
}

TEST_F(Cli, CompareCnWritesFourProfiles) {
  ASSERT_EQ(run("compare-cn --problem rotating_gaussian --dim 2 --level 3 --samples 101"), 0) << output();
  for (const char* f : {"spacetime_profile_t_0.csv", "spacetime_profile_t_1.csv", "cn_profile_t_0.csv",
                        "cn_profile_t_1.csv"}) {
    const auto csv = read(dir / f);
    EXPECT_EQ(first_line(csv), "arc_length,u") << f;
    EXPECT_EQ(line_count(csv), 102u) << f;
  }
  EXPECT_EQ(read(dir / "spacetime_profile_t_0.csv"), read(dir / "cn_profile_t_0.csv"));
  EXPECT_NE(output().find("displacement"), std::string::npos);
}

TEST_F(Cli, CustomSegment) {
  ASSERT_EQ(run("compare-cn --problem rotating_gaussian --dim 2 --level 2 --samples 3 "
                "--segment-start 0,0.5 --segment-end 1,0.5"),
            0)
      << output();
  const auto csv = read(dir / "cn_profile_t_0.csv");
  EXPECT_NE(csv.find("\n1,"), std::string::npos) << csv;
  EXPECT_EQ(run("compare-cn --dim 2 --level 2 --segment-start 0,0.5"), 2);
}

TEST_F(Cli, ConditionTable) {
  ASSERT_EQ(run("condition --problem advdiff_mms --nu 1e-6 --level 3"), 0) << output();
  EXPECT_EQ(first_line(read(dir / "condition.csv")), "dof,kappa_stabilized,kappa_unstabilized");
  EXPECT_LT(last_value(dir / "condition.csv", "kappa_stabilized"),
            last_value(dir / "condition.csv", "kappa_unstabilized"));
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "problem=advdiff_mms\nnu=1e-6\nlevel=2\ndegree=2\n";
  }
  fs::create_directories(dir / "file");
  fs::create_directories(dir / "flags");
  ASSERT_EQ(run("solve --config " + (dir / "run.cfg").string() + " --level 3", dir / "file"), 0) << output();
  ASSERT_EQ(run("solve --problem advdiff_mms --nu 1e-6 --degree 2 --level 3", dir / "flags"), 0) << output();
  EXPECT_EQ(read(dir / "file" / "errors.csv"), read(dir / "flags" / "errors.csv"));
}

TEST_F(Cli, ConfigFileRejectsUnknownKeys) {
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "problem=heat_mms\nmesh_size=3\n";
  }
  EXPECT_EQ(run("solve --config " + (dir / "bad.cfg").string()), 2);
  EXPECT_NE(output().find("mesh_size"), std::string::npos);
  EXPECT_EQ(run("solve --config " + (dir / "absent.cfg").string()), 2);
}
