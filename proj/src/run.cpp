#include "baryflow/run.hpp"

#include "baryflow/simd/kernels.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace baryflow {

const char* version_string() { return BARYFLOW_VERSION_STRING; }

Problem parse_problem(const std::string& s) {
  if (s == "kde") return Problem::Kde;
  if (s == "features") return Problem::Features;
  throw InvalidInput("unknown problem '" + s + "' (expected kde or features)");
}

const char* problem_name(Problem p) { return p == Problem::Kde ? "kde" : "features"; }

SolveOutcome run_solve(const SolveOptions& opt, Dataset data) {
  SolveOutcome out;
  out.cost = CostModel::parse(opt.cost);
  if (opt.bandwidth_b) {
    if (data.z.kind != Covariates::Kind::Continuous)
      throw InvalidInput("--bandwidth-b applies to continuous covariates only");
    data.z.bandwidth = *opt.bandwidth_b;
  }
  const auto d = static_cast<std::size_t>(data.x.cols());
  if (opt.problem == Problem::Kde)
    out.spec = TestFunctionSpec::kde(opt.bandwidth_a ? *opt.bandwidth_a : median_bandwidth(data.x));
  else
    out.spec = TestFunctionSpec::monomials(d, opt.feature_degree);

  const auto t0 = std::chrono::steady_clock::now();
  out.result = solve(data.x, data.z, out.cost, out.spec, opt.solver);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.data = std::move(data);
  return out;
}

SolveOutcome run_filter(const SolveOptions& opt, const TimeSeriesSample& series) {
  Dataset lagged = lagged_dataset(series.x, opt.lag_covariates);
  SolveOutcome out = run_solve(opt, std::move(lagged));
  out.t.assign(series.t.begin() + 1, series.t.end());
  return out;
}

std::string summary_json(const SolveOptions& opt, const SolveOutcome& out, const std::string& command) {
  using nlohmann::json;
  const SolverConfig& s = opt.solver;
  json cfg = {
      {"input", opt.input},
      {"cost", opt.cost},
      {"cost_model", out.cost.to_string()},
      {"problem", problem_name(opt.problem)},
      {"update", s.update == UpdateRule::Implicit ? "implicit" : "explicit"},
      {"eta0", s.eta0_for(out.data.x.rows())},
      {"niter", s.niter},
      {"lambda_max", s.lambda_max},
      {"omega_alpha", s.omega_alpha},
      {"tol_y", s.tol_y},
      {"tol_LF", s.tol_LF},
      {"precondition", s.precondition},
      {"precondition_mode", s.precondition_mode == PreconditionMode::MeanShift ? "mean-shift" : "linear-solve"},
      {"seed", opt.seed},
  };
  cfg["lambda0"] = s.lambda0 ? json(*s.lambda0) : json("auto");
  if (opt.problem == Problem::Kde)
    cfg["bandwidth_a"] = out.spec.bandwidth_a;
  else
    cfg["feature_degree"] = opt.feature_degree;
  if (out.data.z.kind == Covariates::Kind::Continuous)
    cfg["bandwidth_b"] = opt.bandwidth_b ? json(*opt.bandwidth_b) : json("auto");
  if (command == "filter-timeseries")
    cfg["lag_covariates"] = opt.lag_covariates == LagCovariates::Cartesian ? "cartesian" : "spherical";

  const BarycenterResult& r = out.result;
  json j;
  j["command"] = command;
  j["version"] = version_string();
  j["simd"] = simd::isa_name(simd::kernels().isa);
  j["config"] = cfg;
  j["n_samples"] = out.data.x.rows();
  j["dim"] = out.data.x.cols();
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["lambda0"] = r.lambda0;
  if (!r.history.empty()) {
    const HistoryRecord& h = r.history.back();
    j["final"] = {{"L", h.L}, {"L_C", h.L_C}, {"L_F", h.L_F}, {"lambda", h.lambda}, {"eta", h.eta}};
  } else {
    j["final"] = nullptr;
  }
  j["wall_time_seconds"] = out.seconds;
  return j.dump(2) + "\n";
}

// ----------------------------------------------------------------- OutputSet

OutputSet::~OutputSet() {
  if (committed_) return;
  for (auto& e : entries_) {
    e.stream.reset();
    if (!e.temp.empty()) {
      std::error_code ec;
      std::filesystem::remove(e.temp, ec);
    }
  }
}

std::ostream& OutputSet::open(const std::string& path) {
  Entry e;
  e.path = path;
  if (path == "-") {
    e.stream = std::make_unique<std::ostringstream>();
  } else {
    e.temp = path + ".partial";
    auto f = std::make_unique<std::ofstream>(e.temp, std::ios::binary | std::ios::trunc);
    if (!*f) throw InvalidInput("cannot write " + path);
    e.stream = std::move(f);
  }
  entries_.push_back(std::move(e));
  return *entries_.back().stream;
}

void OutputSet::commit() {
  for (auto& e : entries_) {
    e.stream->flush();
    if (!*e.stream) throw Error("write failed for " + e.path);
  }
  for (auto& e : entries_) {
    if (e.path == "-") {
      std::cout << static_cast<std::ostringstream&>(*e.stream).str();
      std::cout.flush();
      continue;
    }
    e.stream.reset();
    std::filesystem::rename(e.temp, e.path);
    e.temp.clear();
  }
  committed_ = true;
}

}  // namespace baryflow
