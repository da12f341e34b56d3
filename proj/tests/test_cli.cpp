#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qba/cli.hpp"

using namespace qba;
using namespace qba::cli;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("cli_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config validation maps to the config exit code") {
  std::ostringstream log;
  RunConfig cfg;
  cfg.level_max = 9;
  CHECK(run_convergence(cfg, log) == kExitConfigError);

  RunConfig cfg2;
  cfg2.alphas = {-1.0};
  CHECK(run_convergence(cfg2, log) == kExitConfigError);

  RunConfig cfg3;
  cfg3.level_min = 5;
  cfg3.level_max = 3;
  CHECK(run_constants(cfg3, log) == kExitConfigError);

  RunConfig cfg4;  // constrained without a box
  cfg4.level_min = cfg4.level_max = 3;
  CHECK(run_constrained(cfg4, log) == kExitConfigError);

  RunConfig cfg5;
  cfg5.alphas = {1.0, 0.1};  // convergence takes a single alpha
  cfg5.level_min = cfg5.level_max = 3;
  CHECK(run_convergence(cfg5, log) == kExitConfigError);
}

TEST_CASE("convergence run: exit code, fixed schema, deterministic output") {
  TempFile out("conv.csv");
  RunConfig cfg;
  cfg.alphas = {1.0};
  cfg.level_min = 3;
  cfg.level_max = 5;
  cfg.out_path = out.path;
  std::ostringstream log;
  REQUIRE(run_convergence(cfg, log) == kExitOk);

  const std::string csv = slurp(out.path);
  std::istringstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "level,h,err_u_h1,err_z_h1,err_combined,best_combined,nu_measured,"
        "nu_minus_1,kappa_h_bound,consistency_gap");
  int rows = 0;
  std::string line;
  bool saw_rate_footer = false;
  while (std::getline(is, line)) {
    if (line.rfind("# rate_err_combined=", 0) == 0) saw_rate_footer = true;
    else if (!line.empty() && line[0] != '#') ++rows;
    CHECK(line.find(';') == std::string::npos);  // comma-separated, '.' decimal
  }
  CHECK(rows == 3);
  CHECK(saw_rate_footer);

  // determinism: a second run produces identical bytes
  TempFile out2("conv2.csv");
  cfg.out_path = out2.path;
  REQUIRE(run_convergence(cfg, log) == kExitOk);
  CHECK(slurp(out2.path) == csv);
}

TEST_CASE("convergence with zero data reports the degenerate flag") {
  TempFile out("conv_zero.csv");
  RunConfig cfg;
  cfg.alphas = {1.0};
  cfg.level_min = 3;
  cfg.level_max = 4;
  cfg.zero_data = true;
  cfg.out_path = out.path;
  std::ostringstream log;
  CHECK(run_convergence(cfg, log) == kExitOk);
  const std::string csv = slurp(out.path);
  CHECK(csv.find("# degenerate_levels=3,4") != std::string::npos);
}

TEST_CASE("p0 convergence run appends the consistency-gap rate") {
  TempFile out("conv_p0.csv");
  RunConfig cfg;
  cfg.alphas = {1.0};
  cfg.level_min = 3;
  cfg.level_max = 5;
  cfg.variant = ControlVariant::PiecewiseConstant;
  cfg.out_path = out.path;
  std::ostringstream log;
  REQUIRE(run_convergence(cfg, log) == kExitOk);
  const std::string csv = slurp(out.path);
  CHECK(csv.find(",rate_consistency_gap=") != std::string::npos);
  // gap column nonzero on p0 rows
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  std::getline(is, line);
  auto pos = line.rfind(',');
  CHECK(std::stod(line.substr(pos + 1)) > 0.0);
}

TEST_CASE("mesh and matrix dumps are written") {
  TempFile mesh_out("mesh.txt");
  TempFile k_out("mats_K.mtx");
  TempFile m_out("mats_M.mtx");
  RunConfig cfg;
  cfg.alphas = {1.0};
  cfg.level_min = 3;
  cfg.level_max = 3;
  cfg.dump_mesh_path = mesh_out.path;
  cfg.dump_matrices_prefix = "cli_test_mats";
  TempFile csv_out("dump_conv.csv");
  cfg.out_path = csv_out.path;
  std::ostringstream log;
  REQUIRE(run_convergence(cfg, log) == kExitOk);

  std::istringstream mesh_is(slurp(mesh_out.path));
  std::size_t nv, nt;
  mesh_is >> nv >> nt;
  CHECK(nv == 81);   // build(8)
  CHECK(nt == 128);

  const std::string mm = slurp(k_out.path);
  CHECK(mm.rfind("%%MatrixMarket matrix coordinate real general", 0) == 0);
  CHECK(slurp(m_out.path).find("49 49") != std::string::npos);
}

TEST_CASE("constrained run at a single level passes its assertions") {
  TempFile out("constr.csv");
  RunConfig cfg;
  cfg.alphas = {1.0};
  cfg.level_min = 3;
  cfg.level_max = 3;
  cfg.box = BoxBounds{-0.2, 0.2};
  cfg.tol = 1e-10;
  cfg.max_iter = 100;
  cfg.out_path = out.path;
  std::ostringstream log;
  REQUIRE(run_constrained(cfg, log) == kExitOk);
  const std::string csv = slurp(out.path);
  std::istringstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "level,h,d_K_alpha,best_d_K_alpha,qba_bound,supercloseness,err_combined,"
        "iterations,residual");
}

TEST_CASE("constrained run accepts an unbounded box") {
  RunConfig cfg;
  cfg.alphas = {1.0};
  cfg.level_min = cfg.level_max = 3;
  cfg.box = BoxBounds{-kUnboundedBox, kUnboundedBox};
  cfg.tol = 1e-10;
  cfg.max_iter = 100;
  std::ostringstream log;
  CHECK(run_constrained(cfg, log) == kExitOk);
}

TEST_CASE("semismooth newton matches the fixed-point study") {
  ConstrainedRow fp = constrained_study_level(1.0, 3, BoxBounds{-0.2, 0.2},
                                              ConstrainedMethod::FixedPoint, 1e-10, 100);
  ConstrainedRow sn = constrained_study_level(1.0, 3, BoxBounds{-0.2, 0.2},
                                              ConstrainedMethod::SemismoothNewton,
                                              1e-10, 100);
  CHECK(fp.d_K_alpha == doctest::Approx(sn.d_K_alpha).epsilon(1e-6));
  CHECK(fp.d_K_alpha <= fp.qba_bound);
  CHECK(sn.d_K_alpha <= sn.qba_bound);
}

TEST_CASE("constants and infsup-demo runs succeed") {
  std::ostringstream log;
  RunConfig cfg;
  cfg.alphas = {1.0, 1e-2, 1e-4};
  CHECK(run_constants(cfg, log) == kExitOk);
  CHECK(log.str().find("kappa") != std::string::npos);

  RunConfig demo;
  demo.alphas = {1.0, 1e-2, 1e-4, 1e-6, 1e-8};
  std::ostringstream log2;
  CHECK(run_infsup_demo(demo, log2) == kExitOk);
}

TEST_CASE("infsup demo values match the closed form") {
  // computed = sqrt(1 - 1/sqrt(1+alpha)) for this 4x4 example
  for (double alpha : {1.0, 1e-2, 1e-4}) {
    const double expected = std::sqrt(1.0 - 1.0 / std::sqrt(1.0 + alpha));
    CHECK(infsup_demo_computed(alpha) == doctest::Approx(expected).epsilon(1e-10));
  }
}
