#pragma once

#include "baryflow/datagen.hpp"
#include "baryflow/solver.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace baryflow {

const char* version_string();

/// Everything `solve` and `filter-timeseries` take from the command line.
struct SolveOptions {
  std::string input = "-";  // "-" reads standard input
  std::string cost = "l2";
  Problem problem = Problem::Kde;
  int feature_degree = 2;
  std::optional<double> bandwidth_a;  // empty: median heuristic on x
  std::optional<double> bandwidth_b;  // continuous covariates; empty: median heuristic on z
  SolverConfig solver;
  std::string output = "-";
  std::string history;
  std::string summary;
  std::uint64_t seed = 0;
  LagCovariates lag_covariates = LagCovariates::Cartesian;  // filter-timeseries only
};

struct SolveOutcome {
  Dataset data;
  std::vector<int> t;  // time stamps, filter-timeseries only
  CostModel cost;
  TestFunctionSpec spec;
  BarycenterResult result;
  double seconds = 0.0;
};

Problem parse_problem(const std::string& s);
const char* problem_name(Problem p);

/// Builds the model from the options and solves on `data`.
SolveOutcome run_solve(const SolveOptions& opt, Dataset data);

/// Builds the lagged dataset from a Cartesian series and solves it.
SolveOutcome run_filter(const SolveOptions& opt, const TimeSeriesSample& series);

/// Run summary: configuration echo, outcome and library version.
std::string summary_json(const SolveOptions& opt, const SolveOutcome& out, const std::string& command);

/// A set of output files that appear together or not at all. Streams write
/// to temporaries that `commit` renames into place; anything uncommitted is
/// removed on destruction. The path "-" buffers for standard output.
class OutputSet {
 public:
  OutputSet() = default;
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet();

  std::ostream& open(const std::string& path);
  void commit();

 private:
  struct Entry {
    std::string path;
    std::string temp;
    std::unique_ptr<std::ostream> stream;
  };
  std::vector<Entry> entries_;
  bool committed_ = false;
};

}  // namespace baryflow
