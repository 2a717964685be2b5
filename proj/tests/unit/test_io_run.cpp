#include "doctest.h"

#include "baryflow/io.hpp"
#include "baryflow/run.hpp"
#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace baryflow;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("baryflow_test_" + name)).string();
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("read categorical and continuous datasets") {
  const Dataset cat = parse("x1,x2,z\n0.5,1,a\n-1,2,b\n3,4,a\n");
  REQUIRE(cat.x.rows() == 3);
  REQUIRE(cat.x.cols() == 2);
  CHECK(cat.x(1, 0) == -1.0);
  CHECK(cat.z.kind == Covariates::Kind::Categorical);
  CHECK(cat.z.num_classes() == 2);
  CHECK(cat.z.labels[0] == cat.z.labels[2]);
  CHECK(cat.z.labels[0] != cat.z.labels[1]);

  const Dataset cont = parse("z2,x1,z1,extra\n1,0.25,2,foo\n3,0.5,4,bar\n");
  CHECK(cont.z.kind == Covariates::Kind::Continuous);
  REQUIRE(cont.z.values.cols() == 2);
  CHECK(cont.z.values(0, 0) == 2.0);
  CHECK(cont.z.values(0, 1) == 1.0);
  CHECK(cont.x(1, 0) == 0.5);

  const Dataset quoted = parse("x1,z\n1,\"a,b\"\n2,\"c\"\n");
  CHECK(quoted.z.num_classes() == 2);
}

TEST_CASE("malformed CSV input") {
  CHECK_THROWS_AS(parse(""), InvalidInput);
  CHECK_THROWS_AS(parse("x1,z,z1\n1,a,2\n2,b,3\n"), InvalidInput);  // ambiguous
  CHECK_THROWS_AS(parse("x1,x2\n1,2\n3,4\n"), InvalidInput);       // no covariate
  CHECK_THROWS_AS(parse("x1,z\n1,a\n"), InvalidInput);              // one row
  CHECK_THROWS_AS(parse("x1,z\n1,a\nfoo,b\n"), InvalidInput);       // non-numeric
  CHECK_THROWS_AS(parse("x1,z\n1,a\n2\n"), InvalidInput);           // ragged
  CHECK_THROWS_AS(parse("x1,x3,z\n1,2,a\n3,4,b\n"), InvalidInput);  // gap
  CHECK_THROWS_AS(parse("y1,z\n1,a\n2,b\n"), InvalidInput);         // no x
  try {
    parse("x1,z,z1\n1,a,2\n2,b,3\n");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("ambiguous") != std::string::npos);
  }
}

TEST_CASE("dataset and result writers round-trip") {
  const Dataset ds = gen_ellipses(4, {.n_per_class = 5});
  std::ostringstream out;
  write_dataset(out, ds);
  const Dataset back = parse(out.str());
  CHECK(back.x == ds.x);
  CHECK(back.z.labels == ds.z.labels);

  std::ostringstream res;
  write_result(res, ds.x, ds.z, 2.0 * ds.x, {});
  const std::string text = res.str();
  CHECK(text.substr(0, text.find('\n')) == "x1,x2,z,y1,y2");

  std::ostringstream hist;
  HistoryRecord h;
  h.iter = 1;
  h.L = 0.5;
  write_history(hist, {h});
  CHECK(hist.str().substr(0, hist.str().find('\n')) == "iter,L,L_C,L_F,lambda,eta,eta_halvings");

  const TimeSeriesSample ts = gen_hidden_signal(3, 20);
  std::ostringstream tso;
  write_timeseries(tso, ts);
  std::istringstream tsi(tso.str());
  const TimeSeriesSample tb = read_timeseries(tsi);
  REQUIRE(tb.x.size() == 20);
  for (std::size_t n = 0; n < 20; ++n) {
    CHECK(tb.x[n] == ts.x[n]);
    CHECK(tb.w[n] == ts.w[n]);
  }
}

TEST_CASE("output set commits all files or none") {
  const std::string a = temp_path("a.csv"), b = temp_path("b.csv");
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  {
    OutputSet set;
    set.open(a) << "one\n";
    set.open(b) << "two\n";
  }
  CHECK_FALSE(std::filesystem::exists(a));
  CHECK_FALSE(std::filesystem::exists(a + ".partial"));
  {
    OutputSet set;
    set.open(a) << "one\n";
    set.open(b) << "two\n";
    set.commit();
  }
  std::ifstream fa(a);
  std::string line;
  std::getline(fa, line);
  CHECK(line == "one");
  CHECK(std::filesystem::exists(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("run_solve and the summary JSON") {
  SolveOptions opt;
  opt.problem = Problem::Features;
  opt.cost = "pnorm:1.5";
  opt.solver.niter = 40;
  const SolveOutcome out = run_solve(opt, gen_ellipses(2, {.n_per_class = 10}));
  CHECK(out.cost.family == CostModel::Family::PNorm);
  CHECK(out.result.y_final.rows() == 30);
  const auto j = nlohmann::json::parse(summary_json(opt, out, "solve"));
  CHECK(j["command"] == "solve");
  CHECK(j["n_samples"] == 30);
  CHECK(j["dim"] == 2);
  CHECK(j["iterations"] == out.result.iterations);
  CHECK(j["config"]["cost"] == "pnorm:1.5");
  CHECK(j["final"]["L_F"].get<double>() == out.result.history.back().L_F);

  CHECK(parse_problem("kde") == Problem::Kde);
  CHECK(parse_problem("features") == Problem::Features);
  CHECK_THROWS_AS(parse_problem("moments"), InvalidInput);

  SolveOptions bad = opt;
  bad.cost = "l3";
  CHECK_THROWS_AS(run_solve(bad, gen_ellipses(2, {.n_per_class = 3})), InvalidInput);
  SolveOptions bw = opt;
  bw.bandwidth_b = 1.0;
  CHECK_THROWS_AS(run_solve(bw, gen_ellipses(2, {.n_per_class = 3})), InvalidInput);
}

TEST_CASE("run_filter builds the lagged problem") {
  SolveOptions opt;
  opt.cost = "geodesic-sphere";
  opt.problem = Problem::Features;
  opt.solver.niter = 3;
  const SolveOutcome out = run_filter(opt, gen_hidden_signal(1, 40));
  CHECK(out.data.x.rows() == 39);
  CHECK(out.t.size() == 39);
  CHECK(out.t.front() == 1);
  CHECK(out.data.z.kind == Covariates::Kind::Continuous);
}
