#ifndef QBA_CLI_HPP
#define QBA_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qba/analysis.hpp"
#include "qba/optsys.hpp"

namespace qba::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertionFailure = 1;
inline constexpr int kExitNumericalFailure = 2;
inline constexpr int kExitConfigError = 3;

struct RunConfig {
  std::vector<double> alphas = {1.0};
  int level_min = 3;
  int level_max = 6;
  ControlVariant variant = ControlVariant::Full;
  std::optional<BoxBounds> box;
  ConstrainedMethod method = ConstrainedMethod::FixedPoint;
  double tol = 1e-10;
  int max_iter = 200;
  std::string out_path;
  std::string dump_mesh_path;
  std::string dump_matrices_prefix;
  unsigned seed = 42;
  bool zero_data = false;

  void validate() const;  // throws std::invalid_argument on bad configs
};

// Convergence study for the unconstrained problem; one CSV row per level,
// rate footer, quasi-best assertions. Returns an exit code.
int run_convergence(const RunConfig& cfg, std::ostream& log);

// Constrained study against two-level overkill references.
int run_constrained(const RunConfig& cfg, std::ostream& log);

// Table of L, gamma, kappa, kappa_alpha per alpha plus the asymptotic
// invariants of the constants formulas.
int run_constants(const RunConfig& cfg, std::ostream& log);

// 4x4 inf-sup sharpness demo (vanishing-regularization example).
int run_infsup_demo(const RunConfig& cfg, std::ostream& log);

// Rows of the convergence CSV (also used by the acceptance suite).
struct ConvergenceRow {
  ErrorReport report;
  double consistency_gap = 0.0;
};
struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  double rate_err_combined = 0.0;
  double rate_nu_minus_1 = 0.0;
  double rate_err_u_l2 = 0.0;
  double rate_consistency_gap = 0.0;
};
ConvergenceResult convergence_study(double alpha, int level_min, int level_max,
                                    ControlVariant variant, double tol, bool zero_data);

struct ConstrainedRow {
  int level = 0;
  double h = 0.0;
  double d_K_alpha = 0.0;
  double best_d_K_alpha = 0.0;
  double qba_bound = 0.0;
  double supercloseness = 0.0;
  double err_combined = 0.0;
  int iterations = 0;
  double residual = 0.0;
};
ConstrainedRow constrained_study_level(double alpha, int level, BoxBounds box,
                                       ConstrainedMethod method, double tol,
                                       int max_iter);

// The 4x4 model operator showing the sqrt(alpha/2) inf-sup blow-up, and the
// Gram of the Hilbert realization of its alpha test norm.
Dense infsup_demo_matrix(double alpha);
Dense infsup_demo_test_gram(double alpha);
double infsup_demo_computed(double alpha);

TriMesh mesh_for_level(int level);

}  // namespace qba::cli

#endif
