#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sizebench/risk.hpp"

namespace sizebench::vartests {

// ---------------------------------------------------------------------------
// Statistical backtests on a violation sequence. Each test reports a
// chi-square statistic with its degrees of freedom and p-value; composite
// tests expose their pieces through `components`, and data quirks that do
// not invalidate the math (few violations, degenerate inputs, dropped
// histories) land in `flags` instead of being thrown.
// ---------------------------------------------------------------------------

struct TestResult {
  std::string name;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool reject_5pct = false;
  std::map<std::string, double> components;
  std::vector<std::string> flags;

  bool has_flag(const std::string& flag) const;
};

// Scaled autocovariances of the hit process. `autocovariances` centers at
// the nominal coverage rate, `centered_stats` at segment sample means; both
// carry a 1/sqrt(n-w) scale so they are asymptotically normal under
// independence.
struct SerialDependenceStats {
  int max_lag = 0;
  std::vector<double> autocovariances;
  std::vector<double> centered_stats;
  std::size_t n_effective = 0;
};

// Conditional outcome counts used by the Markov tests. Day t falls in class
// i >= 1 when the most recent violation among the previous `order` days was
// exactly i days back, and in class 0 when those days are violation-free.
// counts[i] = {days with no violation, days with a violation}.
struct MarkovCounts {
  int order = 1;
  std::vector<std::array<long long, 2>> counts;

  long long total() const;
};

// Hazard model parameters: level a in (0,1), duration exponent b > 0,
// threshold-magnitude coefficient c >= 0. The day-d hazard within a spell
// whose entry threshold magnitude is v reads a * d^(b-1) * exp(c v).
struct GeometricParams {
  double a = 0.05;
  double b = 1.0;
  double c = 0.0;
};

// Likelihood-ratio test of the violation frequency against the nominal
// rate. Chi-square with one degree of freedom.
TestResult uc_test(const risk::HitSequence& hits);

SerialDependenceStats serial_dependence_stats(const risk::HitSequence& hits, int max_lag);

// Ljung-Box-form portmanteau test on the hit autocorrelations up to
// `max_lag`. All-zero or all-one sequences get statistic 0 and a
// "degenerate_hits" flag rather than an error.
TestResult independence_portmanteau(const risk::HitSequence& hits, int max_lag = 5);

MarkovCounts markov_counts(const risk::HitSequence& hits, int order);

// Conditional-coverage likelihood ratios from explicit counts. The headline
// statistic tests conditional hit rates jointly against the nominal rate;
// components carry the independence-only split. Classes that were never
// observed are dropped with a matching df reduction and an
// "unobserved_history" flag.
TestResult markov_from_counts(const MarkovCounts& counts, double alpha);

TestResult markov_test(const risk::HitSequence& hits, int order = 1);

// Duration-based test with the hazard model above. Fits nested maximum
// likelihoods (fixed nominal rate; free level; free level and exponent;
// all three parameters) and reports the telescoping likelihood-ratio
// decomposition: components lr_uc, lr_dind and lr_vind sum to the headline
// statistic, one df each. The spell after the last violation enters as a
// censored survival term.
TestResult geometric_var_test(const risk::HitSequence& hits, const risk::VarSeries& var);

}  // namespace sizebench::vartests
