#pragma once

#include "baryflow/datagen.hpp"
#include "baryflow/solver.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace baryflow {

/// Shortest round-trip text for a double: 17 significant digits.
std::string format_double(double v);

/// Reads a dataset CSV. The header names the sample columns x1..xd and either
/// a single categorical column `z` or numeric columns z1..zm. Other columns
/// are ignored.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);

/// x1..xd followed by the covariate columns.
void write_dataset(std::ostream& out, const Dataset& ds);

/// x1..xd, covariate columns, y1..yd; one row per sample in input order.
/// A leading `t` column is written when `t` is non-empty.
void write_result(std::ostream& out, const Points& x, const Covariates& z, const Points& y,
                  const std::vector<int>& t = {});

/// iter,L,L_C,L_F,lambda,eta,eta_halvings
void write_history(std::ostream& out, const std::vector<HistoryRecord>& history);

/// t,x1,x2,x3,w1,w2,w3
void write_timeseries(std::ostream& out, const TimeSeriesSample& ts);

/// Reads the Cartesian series from columns x1,x2,x3; w1..w3 are optional.
TimeSeriesSample read_timeseries(std::istream& in);

}  // namespace baryflow
