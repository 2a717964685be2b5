// Command-line front end: dataset generators, the barycenter solve and the
// time-series filter.

#include "baryflow/costs.hpp"
#include "baryflow/datagen.hpp"
#include "baryflow/io.hpp"
#include "baryflow/run.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

using namespace baryflow;

namespace {

struct GenArgs {
  std::string kind;
  std::string output = "-";
  std::optional<std::uint64_t> seed;
  int n_per_class = 0;
  bool same_hemisphere = false;
  double band_lo = std::numbers::pi / 8.0;
  double band_hi = std::numbers::pi / 4.0;
  int T = 1000;
  double cap_width = 0.45;
  double jitter = 0.01;
};

// Text options that accept either "auto" or a positive number.
struct AutoNumber {
  std::string text = "auto";
  std::optional<double> value(const char* name) const {
    if (text == "auto") return std::nullopt;
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used == text.size() && v > 0.0) return v;
    } catch (const std::exception&) {
    }
    throw InvalidInput(std::string("--") + name + " expects 'auto' or a positive number, got '" + text + "'");
  }
};

struct SolveArgs {
  SolveOptions opt;
  std::string problem = "kde";
  std::string update = "implicit";
  std::string precondition_mode = "mean-shift";
  std::string covariates = "cartesian";
  AutoNumber bandwidth_a, bandwidth_b, eta0, lambda0;
  std::optional<std::uint64_t> seed;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("BARYFLOW_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw InvalidInput("BARYFLOW_SEED must be a non-negative integer");
    return v;
  }
  return 0;
}

void add_solve_flags(CLI::App* cmd, SolveArgs& a, bool filter) {
  SolveOptions& o = a.opt;
  cmd->add_option("-i,--input", o.input, filter ? "Time-series CSV (t,x1,x2,x3[,w1,w2,w3]); '-' for stdin"
                                                : "Dataset CSV; '-' for stdin")
      ->capture_default_str();
  cmd->add_option("-c,--cost", o.cost, "l2 | pnorm:<p> | geodesic-sphere | distortion:<omega>")->capture_default_str();
  cmd->add_option("--problem", a.problem, "kde | features")->capture_default_str();
  cmd->add_option("--feature-degree", o.feature_degree, "Monomial degree of the feature basis")->capture_default_str();
  cmd->add_option("--bandwidth-a", a.bandwidth_a.text, "KDE bandwidth in y-space, or auto")->capture_default_str();
  cmd->add_option("--bandwidth-b", a.bandwidth_b.text, "Kernel bandwidth for continuous covariates, or auto")
      ->capture_default_str();
  cmd->add_option("--update", a.update, "implicit | explicit")->capture_default_str();
  cmd->add_option("--eta0", a.eta0.text, "Largest learning rate, or auto (10 N)")->capture_default_str();
  cmd->add_option("--niter", o.solver.niter, "Iteration limit")->capture_default_str();
  cmd->add_option("--lambda0", a.lambda0.text, "Initial multiplier, or auto")->capture_default_str();
  cmd->add_option("--lambda-max", o.solver.lambda_max, "Multiplier cap")->capture_default_str();
  cmd->add_option("--omega-alpha", o.solver.omega_alpha, "alpha = omega_alpha * lambda")->capture_default_str();
  cmd->add_option("--tol-y", o.solver.tol_y, "Relative change of y for convergence")->capture_default_str();
  cmd->add_option("--tol-lf", o.solver.tol_LF, "L_F threshold for convergence")->capture_default_str();
  cmd->add_flag("--precondition", o.solver.precondition, "Match conditional means before the flow");
  cmd->add_option("--precondition-mode", a.precondition_mode, "mean-shift | linear-solve")->capture_default_str();
  cmd->add_option("-o,--output", o.output, "Result CSV; '-' for stdout")->capture_default_str();
  cmd->add_option("--history", o.history, "History CSV path");
  cmd->add_option("--summary", o.summary, "Run summary JSON path");
  cmd->add_option("--seed", a.seed, "Seed echoed in the summary (default: BARYFLOW_SEED or 0)");
  if (filter)
    cmd->add_option("--covariates", a.covariates, "cartesian | spherical form of the lagged covariate")
        ->capture_default_str();
}

SolveOptions finish(SolveArgs& a) {
  SolveOptions o = a.opt;
  o.problem = parse_problem(a.problem);
  o.bandwidth_a = a.bandwidth_a.value("bandwidth-a");
  o.bandwidth_b = a.bandwidth_b.value("bandwidth-b");
  o.solver.eta0 = a.eta0.value("eta0");
  o.solver.lambda0 = a.lambda0.value("lambda0");
  if (a.update == "implicit")
    o.solver.update = UpdateRule::Implicit;
  else if (a.update == "explicit")
    o.solver.update = UpdateRule::Explicit;
  else
    throw InvalidInput("--update expects implicit or explicit");
  if (a.precondition_mode == "mean-shift")
    o.solver.precondition_mode = PreconditionMode::MeanShift;
  else if (a.precondition_mode == "linear-solve")
    o.solver.precondition_mode = PreconditionMode::LinearSolve;
  else
    throw InvalidInput("--precondition-mode expects mean-shift or linear-solve");
  if (a.covariates == "cartesian")
    o.lag_covariates = LagCovariates::Cartesian;
  else if (a.covariates == "spherical")
    o.lag_covariates = LagCovariates::Spherical;
  else
    throw InvalidInput("--covariates expects cartesian or spherical");
  o.seed = resolve_seed(a.seed);
  o.solver.validate();
  return o;
}

template <class F>
auto with_input(const std::string& path, F&& read) {
  if (path == "-") return read(std::cin);
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read(in);
}

void emit(const SolveOptions& o, const SolveOutcome& out, const std::string& command) {
  OutputSet files;
  write_result(files.open(o.output), out.data.x, out.data.z, out.result.y_final, out.t);
  if (!o.history.empty()) write_history(files.open(o.history), out.result.history);
  if (!o.summary.empty()) files.open(o.summary) << summary_json(o, out, command);
  files.commit();
}

int run_gen(const GenArgs& g) {
  const std::uint64_t seed = resolve_seed(g.seed);
  OutputSet files;
  std::ostream& os = files.open(g.output);
  if (g.kind == "ellipses") {
    EllipseOptions opt;
    if (g.n_per_class > 0) opt.n_per_class = g.n_per_class;
    write_dataset(os, gen_ellipses(seed, opt));
  } else if (g.kind == "sphere-patches") {
    SpherePatchOptions opt;
    if (g.n_per_class > 0) opt.n_per_class = g.n_per_class;
    opt.antipodal = !g.same_hemisphere;
    opt.shifted_lo = g.band_lo;
    opt.shifted_hi = g.band_hi;
    write_dataset(os, gen_sphere_patches(seed, opt));
  } else if (g.kind == "hidden-signal") {
    write_timeseries(os, gen_hidden_signal(seed, g.T, g.cap_width));
  } else {
    write_dataset(os, gen_six_shapes(seed, g.n_per_class > 0 ? g.n_per_class : 200, g.jitter));
  }
  files.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional barycenters of conditional samples by a penalty gradient flow"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic dataset");
  gen_cmd->add_option("kind", gen.kind, "ellipses | sphere-patches | hidden-signal | six-shapes")
      ->required()
      ->check(CLI::IsMember({"ellipses", "sphere-patches", "hidden-signal", "six-shapes"}));
  gen_cmd->add_option("-o,--output", gen.output, "Output CSV; '-' for stdout")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed (default: BARYFLOW_SEED or 0)");
  gen_cmd->add_option("--n-per-class", gen.n_per_class, "Samples per class (default 100, 250 or 200)");
  gen_cmd->add_flag("--same-hemisphere", gen.same_hemisphere, "sphere-patches: move class 1 north");
  gen_cmd->add_option("--band-lo", gen.band_lo, "sphere-patches: shifted band, lower latitude")->capture_default_str();
  gen_cmd->add_option("--band-hi", gen.band_hi, "sphere-patches: shifted band, upper latitude")->capture_default_str();
  gen_cmd->add_option("--T", gen.T, "hidden-signal: series length")->capture_default_str();
  gen_cmd->add_option("--cap-width", gen.cap_width, "hidden-signal: polar cap width (rad)")->capture_default_str();
  gen_cmd->add_option("--jitter", gen.jitter, "six-shapes: Gaussian jitter")->capture_default_str();

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Compute the barycenter of a dataset CSV");
  add_solve_flags(solve_cmd, solve_args, false);

  SolveArgs filter_args;
  filter_args.opt.cost = "geodesic-sphere";
  filter_args.problem = "features";
  auto* filter_cmd = app.add_subcommand(
      "filter-timeseries", "Filter a unit-sphere series using the previous point as covariate");
  add_solve_flags(filter_cmd, filter_args, true);

  CLI11_PARSE(app, argc, argv);

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == gen_cmd) return run_gen(gen);

    SolveArgs& a = active == solve_cmd ? solve_args : filter_args;
    try {
      CostModel::parse(a.opt.cost);
    } catch (const InvalidInput& e) {
      std::cerr << "error: " << e.what() << "\n\n" << active->help();
      return 2;
    }
    const SolveOptions o = finish(a);
    if (active == solve_cmd) {
      Dataset ds = with_input(o.input, [](std::istream& in) { return read_dataset(in); });
      emit(o, run_solve(o, std::move(ds)), "solve");
    } else {
      TimeSeriesSample ts = with_input(o.input, [](std::istream& in) { return read_timeseries(in); });
      emit(o, run_filter(o, ts), "filter-timeseries");
    }
    return 0;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FlowDiverged& e) {
    std::cerr << "error: " << e.what() << " at iteration " << e.iteration() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
