#include "baryflow/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>

namespace baryflow {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Columns named prefix1, prefix2, ... in numbering order; throws on gaps.
std::vector<std::size_t> numbered_columns(const std::vector<std::string>& header,
                                          const std::string& prefix) {
  std::map<int, std::size_t> found;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) continue;
    int k = 0;
    auto [ptr, ec] = std::from_chars(h.data() + prefix.size(), h.data() + h.size(), k);
    if (ec != std::errc() || ptr != h.data() + h.size() || k < 1) continue;
    if (!found.emplace(k, c).second) throw InvalidInput("csv: duplicate column " + h);
  }
  std::vector<std::size_t> cols;
  int expect = 1;
  for (const auto& [k, c] : found) {
    if (k != expect) throw InvalidInput("csv: column " + prefix + std::to_string(expect) + " is missing");
    cols.push_back(c);
    ++expect;
  }
  return cols;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw InvalidInput("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                         " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw InvalidInput("csv: missing header");
  return t;
}

Matrix numeric_block(const Table& t, const std::vector<std::size_t>& cols) {
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string& cell = t.rows[r][cols[j]];
      auto v = parse_number(cell);
      if (!v || !std::isfinite(*v))
        throw InvalidInput("csv: non-numeric value '" + cell + "' in column " + t.header[cols[j]] +
                           " (data row " + std::to_string(r + 1) + ")");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
    }
  return m;
}

void write_covariate_header(std::ostream& out, const Covariates& z) {
  if (z.kind == Covariates::Kind::Categorical) {
    out << ",z";
  } else {
    for (Eigen::Index j = 0; j < z.values.cols(); ++j) out << ",z" << j + 1;
  }
}

void write_covariate_row(std::ostream& out, const Covariates& z, Eigen::Index i) {
  if (z.kind == Covariates::Kind::Categorical) {
    out << ',' << z.class_names[static_cast<std::size_t>(z.labels[static_cast<std::size_t>(i)])];
  } else {
    for (Eigen::Index j = 0; j < z.values.cols(); ++j) out << ',' << format_double(z.values(i, j));
  }
}

}  // namespace

Dataset read_dataset(std::istream& in) {
  const Table t = read_table(in);
  const auto xcols = numbered_columns(t.header, "x");
  if (xcols.empty()) throw InvalidInput("csv: header has no x1 column");
  const auto zcols = numbered_columns(t.header, "z");
  std::optional<std::size_t> zcat;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c] == "z") {
      if (zcat) throw InvalidInput("csv: duplicate column z");
      zcat = c;
    }
  if (zcat && !zcols.empty()) throw InvalidInput("csv: ambiguous covariates (both z and z1.. columns)");
  if (!zcat && zcols.empty()) throw InvalidInput("csv: no covariate column (z or z1..)");
  if (t.rows.size() < 2) throw InvalidInput("csv: at least two data rows are required");

  Dataset ds;
  ds.x = numeric_block(t, xcols);
  if (zcat) {
    std::vector<std::string> names;
    names.reserve(t.rows.size());
    for (const auto& r : t.rows) {
      if (r[*zcat].empty()) throw InvalidInput("csv: empty class label");
      names.push_back(r[*zcat]);
    }
    ds.z = Covariates::categorical(names);
  } else {
    ds.z = Covariates::continuous(numeric_block(t, zcols));
  }
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  for (Eigen::Index j = 0; j < ds.x.cols(); ++j) out << (j ? ",x" : "x") << j + 1;
  write_covariate_header(out, ds.z);
  out << '\n';
  for (Eigen::Index i = 0; i < ds.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) out << (j ? "," : "") << format_double(ds.x(i, j));
    write_covariate_row(out, ds.z, i);
    out << '\n';
  }
}

void write_result(std::ostream& out, const Points& x, const Covariates& z, const Points& y,
                  const std::vector<int>& t) {
  if (y.rows() != x.rows() || y.cols() != x.cols()) throw InvalidInput("result: shape mismatch");
  const bool with_t = !t.empty();
  if (with_t && static_cast<Eigen::Index>(t.size()) != x.rows())
    throw InvalidInput("result: time column has the wrong length");
  if (with_t) out << "t,";
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? ",x" : "x") << j + 1;
  write_covariate_header(out, z);
  for (Eigen::Index j = 0; j < y.cols(); ++j) out << ",y" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (with_t) out << t[static_cast<std::size_t>(i)] << ',';
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
    write_covariate_row(out, z, i);
    for (Eigen::Index j = 0; j < y.cols(); ++j) out << ',' << format_double(y(i, j));
    out << '\n';
  }
}

void write_history(std::ostream& out, const std::vector<HistoryRecord>& history) {
  out << "iter,L,L_C,L_F,lambda,eta,eta_halvings\n";
  for (const auto& h : history)
    out << h.iter << ',' << format_double(h.L) << ',' << format_double(h.L_C) << ','
        << format_double(h.L_F) << ',' << format_double(h.lambda) << ',' << format_double(h.eta)
        << ',' << h.eta_halvings << '\n';
}

void write_timeseries(std::ostream& out, const TimeSeriesSample& ts) {
  out << "t,x1,x2,x3,w1,w2,w3\n";
  for (std::size_t n = 0; n < ts.x.size(); ++n) {
    out << ts.t[n];
    for (int j = 0; j < 3; ++j) out << ',' << format_double(ts.x[n][j]);
    for (int j = 0; j < 3; ++j) out << ',' << format_double(ts.w[n][j]);
    out << '\n';
  }
}

TimeSeriesSample read_timeseries(std::istream& in) {
  const Table t = read_table(in);
  const auto xcols = numbered_columns(t.header, "x");
  if (xcols.size() != 3) throw InvalidInput("time series: expected columns x1,x2,x3");
  const auto wcols = numbered_columns(t.header, "w");
  if (!wcols.empty() && wcols.size() != 3) throw InvalidInput("time series: expected columns w1,w2,w3");
  std::optional<std::size_t> tcol;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c] == "t") tcol = c;

  const Matrix X = numeric_block(t, xcols);
  const Matrix W = wcols.empty() ? Matrix() : numeric_block(t, wcols);
  TimeSeriesSample ts;
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    const Eigen::Vector3d v = X.row(n).transpose();
    if (!(v.norm() > 0.0)) throw InvalidInput("time series: zero vector at row " + std::to_string(n + 1));
    ts.x.push_back(v);
    if (W.size()) ts.w.push_back(W.row(n).transpose());
    int step = static_cast<int>(n);
    if (tcol) {
      auto tv = parse_number(t.rows[static_cast<std::size_t>(n)][*tcol]);
      if (!tv) throw InvalidInput("time series: non-numeric t");
      step = static_cast<int>(*tv);
    }
    ts.t.push_back(step);
  }
  return ts;
}

}  // namespace baryflow
