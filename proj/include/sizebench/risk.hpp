#pragma once

#include <cstddef>
#include <iosfwd>
#include <numeric>
#include <vector>

#include "sizebench/bars.hpp"
#include "sizebench/dates.hpp"

namespace sizebench::risk {

// ---------------------------------------------------------------------------
// Value-at-risk over rolling windows, plus the violation record that the
// coverage tests consume. All thresholds live in return space: a long-side
// value is the lower alpha-quantile of the return distribution (negative for
// realistic inputs), a short-side value the upper one.
// ---------------------------------------------------------------------------

enum class Family { Normal, StudentT };

struct DistributionParams {
  double mu = 0.0;
  double sigma = 1.0;
  Family family = Family::Normal;
  double df = 0.0;  // degrees of freedom, StudentT only, must be > 2
};

enum class Side { Long, Short };
enum class VarMethod { Parametric, Historical };

Side side_from_string(const std::string& s);
VarMethod var_method_from_string(const std::string& s);
std::string to_string(Side side);
std::string to_string(VarMethod method);

struct VarConfig {
  double alpha = 0.05;
  Side side = Side::Long;
  VarMethod method = VarMethod::Parametric;
  int window = 250;  // one trading year of lookback by default
};

// Enforces 0 < alpha < 0.5 and window >= 30.
void validate(const VarConfig& config);

struct VarSeries {
  std::vector<Date> dates;
  std::vector<double> var_values;
  VarConfig config;
  // Set when at least one lookback window had zero variance, in which case
  // that day's threshold degenerates to the window mean.
  bool degenerate_window = false;

  std::size_t size() const { return dates.size(); }
};

struct HitSequence {
  std::vector<Date> dates;
  std::vector<int> hits;  // 0 or 1
  double alpha = 0.05;

  std::size_t size() const { return hits.size(); }
  int count() const { return std::accumulate(hits.begin(), hits.end(), 0); }
};

// Standardized quantile of the family at `prob`. Student-t values are scaled
// by sqrt((df-2)/df) so that sigma stays the true standard deviation rather
// than the t scale parameter.
double standardized_quantile(const DistributionParams& params, double prob);

// One-day threshold from explicit distribution parameters:
//   long:  mu + k*(alpha) sigma
//   short: mu + k*(1-alpha) sigma
// Accepts any alpha in (0, 1) so symmetric sanity checks (alpha = 0.5) work;
// rolling estimation applies the stricter config validation.
double parametric_var(const DistributionParams& params, const VarConfig& config);

// Threshold series over a rolling lookback. The value dated t is computed
// from returns strictly before t, so the series never peeks at the return it
// will be compared against. Parametric fits sample moments of the window and
// uses the normal quantile; historical takes the type-7 empirical quantile
// (upper tail for the short side).
VarSeries rolling_var(const ReturnSeries& returns, const VarConfig& config);

// Violation indicators: long breach is return <= threshold (inclusive),
// short breach is return >= threshold. Every threshold date must appear in
// the return series.
HitSequence hit_sequence(const ReturnSeries& returns, const VarSeries& var, Side side);

// Writes "date,return,var,hit" rows for the evaluated days.
void write_var_csv(std::ostream& out, const ReturnSeries& returns, const VarSeries& var,
                   const HitSequence& hits);

}  // namespace sizebench::risk
