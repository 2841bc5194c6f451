#include "sizebench/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>

#include "sizebench/errors.hpp"
#include "sizebench/stats.hpp"

namespace sizebench::risk {

Side side_from_string(const std::string& s) {
  if (s == "long") return Side::Long;
  if (s == "short") return Side::Short;
  throw UnknownKindError("unknown side: " + s);
}

VarMethod var_method_from_string(const std::string& s) {
  if (s == "parametric") return VarMethod::Parametric;
  if (s == "historical") return VarMethod::Historical;
  throw UnknownKindError("unknown VaR method: " + s);
}

std::string to_string(Side side) { return side == Side::Long ? "long" : "short"; }

std::string to_string(VarMethod method) {
  return method == VarMethod::Parametric ? "parametric" : "historical";
}

void validate(const VarConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 0.5))
    throw DomainError("VaR config: alpha must lie in (0, 0.5)");
  if (config.window < 30) throw DomainError("VaR config: window must be at least 30 days");
}

double standardized_quantile(const DistributionParams& params, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile probability must lie in (0, 1)");
  switch (params.family) {
    case Family::Normal:
      return stats::normal_quantile(prob);
    case Family::StudentT: {
      if (!(params.df > 2.0))
        throw DomainError("student_t VaR needs df > 2 for a finite variance");
      // Rescale so a unit-sigma t variate really has standard deviation one.
      return stats::student_t_quantile(prob, params.df) *
             std::sqrt((params.df - 2.0) / params.df);
    }
  }
  throw DomainError("unhandled distribution family");
}

double parametric_var(const DistributionParams& params, const VarConfig& config) {
  if (!(params.sigma > 0.0)) throw DomainError("parametric_var: sigma must be positive");
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw DomainError("parametric_var: alpha must lie in (0, 1)");
  const double prob = config.side == Side::Long ? config.alpha : 1.0 - config.alpha;
  return params.mu + standardized_quantile(params, prob) * params.sigma;
}

VarSeries rolling_var(const ReturnSeries& returns, const VarConfig& config) {
  validate(config);
  const auto n = returns.values.size();
  const auto window = static_cast<std::size_t>(config.window);
  if (n <= window)
    throw InsufficientDataError("rolling_var: need more returns than the lookback window");

  VarSeries out;
  out.config = config;
  out.dates.reserve(n - window);
  out.var_values.reserve(n - window);
  const double prob = config.side == Side::Long ? config.alpha : 1.0 - config.alpha;

  for (std::size_t t = window; t < n; ++t) {
    const std::span<const double> slice(returns.values.data() + (t - window), window);
    double threshold;
    if (config.method == VarMethod::Historical) {
      threshold = stats::quantile_type7(slice, prob);
    } else {
      const auto [lo, hi] = std::minmax_element(slice.begin(), slice.end());
      if (*lo == *hi) {
        // Zero-variance window: no scale to estimate, so the threshold
        // collapses onto the constant itself and we flag the series.
        threshold = *lo;
        out.degenerate_window = true;
      } else {
        DistributionParams fit;
        fit.mu = stats::mean(slice);
        fit.sigma = stats::stdev(slice);
        threshold = fit.mu + stats::normal_quantile(prob) * fit.sigma;
      }
    }
    out.dates.push_back(returns.dates[t]);
    out.var_values.push_back(threshold);
  }
  return out;
}

HitSequence hit_sequence(const ReturnSeries& returns, const VarSeries& var, Side side) {
  HitSequence out;
  out.alpha = var.config.alpha;
  out.dates = var.dates;
  out.hits.reserve(var.size());

  std::size_t r = 0;
  for (std::size_t i = 0; i < var.size(); ++i) {
    while (r < returns.dates.size() && returns.dates[r] < var.dates[i]) ++r;
    if (r >= returns.dates.size() || returns.dates[r] != var.dates[i])
      throw DateMisalignmentError("hit_sequence: threshold date " + var.dates[i].to_string() +
                                  " has no matching return");
    const double y = returns.values[r];
    const double v = var.var_values[i];
    out.hits.push_back(side == Side::Long ? (y <= v ? 1 : 0) : (y >= v ? 1 : 0));
  }
  return out;
}

void write_var_csv(std::ostream& out, const ReturnSeries& returns, const VarSeries& var,
                   const HitSequence& hits) {
  if (var.size() != hits.size())
    throw DateMisalignmentError("write_var_csv: threshold and hit lengths differ");
  out << "date,return,var,hit\n";
  char buf[64];
  std::size_t r = 0;
  for (std::size_t i = 0; i < var.size(); ++i) {
    while (r < returns.dates.size() && returns.dates[r] < var.dates[i]) ++r;
    if (r >= returns.dates.size() || returns.dates[r] != var.dates[i])
      throw DateMisalignmentError("write_var_csv: threshold date " + var.dates[i].to_string() +
                                  " has no matching return");
    out << var.dates[i].to_string() << ',';
    std::snprintf(buf, sizeof buf, "%.17g", returns.values[r]);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", var.var_values[i]);
    out << buf << ',' << hits.hits[i] << '\n';
  }
}

}  // namespace sizebench::risk
