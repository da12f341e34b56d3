#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qba/cli.hpp"

namespace {

using qba::cli::RunConfig;

// "a:b" -> [a, b]; a single value means a:a
void parse_levels(const std::string& s, RunConfig& cfg) {
  auto pos = s.find(':');
  if (pos == std::string::npos) {
    cfg.level_min = cfg.level_max = std::stoi(s);
    return;
  }
  cfg.level_min = std::stoi(s.substr(0, pos));
  cfg.level_max = std::stoi(s.substr(pos + 1));
}

double parse_bound(const std::string& s) {
  if (s == "inf" || s == "+inf") return qba::kUnboundedBox;
  if (s == "-inf") return -qba::kUnboundedBox;
  return std::stod(s);
}

// "lo:hi"; use inf/-inf (or +-1e308) for unbounded sides
void parse_box(const std::string& s, RunConfig& cfg) {
  auto pos = s.find(':', 1);  // skip a leading minus sign
  if (pos == std::string::npos) throw CLI::ValidationError("--box expects lo:hi");
  qba::BoxBounds box;
  box.lo = parse_bound(s.substr(0, pos));
  box.hi = parse_bound(s.substr(pos + 1));
  cfg.box = box;
}

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Strips --config from the raw arguments and splices the file's key=value
// pairs in right after the subcommand token. Explicit flags come later in
// the sequence and win through the take-last option policy.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> raw(argv + 1, argv + argc);
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == "--config") {
      if (i + 1 >= raw.size())
        throw std::invalid_argument("--config requires a file path");
      path = raw[++i];
    } else if (raw[i].rfind("--config=", 0) == 0) {
      path = raw[i].substr(9);
    } else {
      rest.push_back(raw[i]);
    }
  }
  if (path.empty()) return rest;

  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  std::vector<std::string> from_file;
  std::string line;
  while (std::getline(is, line)) {
    line = trimmed(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config file: expected key=value, got: " + line);
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config file: empty key in: " + line);
    from_file.push_back("--" + key + "=" + value);
  }

  std::vector<std::string> out;
  bool spliced = false;
  for (const std::string& a : rest) {
    out.push_back(a);
    if (!spliced && !a.empty() && a[0] != '-') {
      out.insert(out.end(), from_file.begin(), from_file.end());
      spliced = true;
    }
  }
  if (!spliced) out.insert(out.end(), from_file.begin(), from_file.end());
  return out;
}

void add_common_options(CLI::App* cmd, RunConfig& cfg, std::string& levels,
                        std::string& box, std::string& variant, std::string& method) {
  const auto last = CLI::MultiOptionPolicy::TakeLast;
  cmd->add_option("--alpha", cfg.alphas, "Tikhonov parameter (single value)")
      ->expected(1)
      ->multi_option_policy(last);
  cmd->add_option("--alphas", cfg.alphas, "comma-separated Tikhonov parameters")
      ->delimiter(',')
      ->multi_option_policy(last);
  cmd->add_option("--levels", levels, "level range a:b (mesh n = 2^level)")
      ->multi_option_policy(last);
  cmd->add_option("--variant", variant, "control variant: full | p0")
      ->multi_option_policy(last);
  cmd->add_option("--box", box, "control box lo:hi (use inf/-inf for unbounded)")
      ->multi_option_policy(last);
  cmd->add_option("--method", method, "constrained method: fixed-point | ssn")
      ->multi_option_policy(last);
  cmd->add_option("--tol", cfg.tol, "solver tolerance")->multi_option_policy(last);
  cmd->add_option("--max-iter", cfg.max_iter, "outer iteration cap")
      ->multi_option_policy(last);
  cmd->add_option("--out", cfg.out_path, "CSV output path (default: stdout)")
      ->multi_option_policy(last);
  cmd->add_option("--dump-mesh", cfg.dump_mesh_path, "dump the coarsest mesh to a file")
      ->multi_option_policy(last);
  cmd->add_option("--dump-matrices", cfg.dump_matrices_prefix,
                  "dump assembled matrices as MatrixMarket files with this prefix")
      ->multi_option_policy(last);
  cmd->add_option("--seed", cfg.seed, "random seed (default 42)")
      ->multi_option_policy(last);
  cmd->add_flag("--zero-data", cfg.zero_data, "override the desired state with u_d = 0");
}

int finalize_config(RunConfig& cfg, const std::string& levels, const std::string& box,
                    const std::string& variant, const std::string& method) {
  if (!levels.empty()) parse_levels(levels, cfg);
  if (!box.empty()) parse_box(box, cfg);
  if (variant == "p0")
    cfg.variant = qba::ControlVariant::PiecewiseConstant;
  else if (variant == "full" || variant.empty())
    cfg.variant = qba::ControlVariant::Full;
  else
    throw CLI::ValidationError("--variant must be full or p0");
  if (method == "ssn")
    cfg.method = qba::ConstrainedMethod::SemismoothNewton;
  else if (method == "fixed-point" || method.empty())
    cfg.method = qba::ConstrainedMethod::FixedPoint;
  else
    throw CLI::ValidationError("--method must be fixed-point or ssn");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qba: quasi-best approximation benchmarks for PDE-constrained optimization"};
  app.require_subcommand(1);
  app.footer("--config FILE  flat key=value config file; command-line flags win");

  RunConfig cfg;
  std::string levels, box, variant, method;

  CLI::App* conv = app.add_subcommand("convergence", "convergence study (unconstrained)");
  add_common_options(conv, cfg, levels, box, variant, method);
  CLI::App* cons = app.add_subcommand("constrained", "box-constrained study");
  add_common_options(cons, cfg, levels, box, variant, method);
  CLI::App* consts = app.add_subcommand("constants", "table of stability constants");
  add_common_options(consts, cfg, levels, box, variant, method);
  CLI::App* infsup = app.add_subcommand("infsup-demo", "4x4 inf-sup sharpness demo");
  add_common_options(infsup, cfg, levels, box, variant, method);

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const std::string& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
    finalize_config(cfg, levels, box, variant, method);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qba::cli::kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return qba::cli::kExitConfigError;
  }

  if (conv->parsed()) return qba::cli::run_convergence(cfg, std::cout);
  if (cons->parsed()) return qba::cli::run_constrained(cfg, std::cout);
  if (consts->parsed()) return qba::cli::run_constants(cfg, std::cout);
  if (infsup->parsed()) return qba::cli::run_infsup_demo(cfg, std::cout);
  return qba::cli::kExitConfigError;
}
