#include "sizebench/vartests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sizebench/errors.hpp"
#include "sizebench/optimize.hpp"
#include "sizebench/stats.hpp"

namespace sizebench::vartests {

namespace {

constexpr double kHazardClamp = 1e-12;

// x ln y with the 0 ln 0 := 0 convention used throughout the likelihoods.
double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(y);
}

double chi2_pvalue(double statistic, int df) {
  if (df <= 0) return 1.0;
  return stats::chi2_sf(statistic, static_cast<double>(df));
}

void finalize(TestResult& result) {
  result.statistic = std::max(0.0, result.statistic);
  result.p_value = chi2_pvalue(result.statistic, result.df);
  result.reject_5pct = result.p_value < 0.05;
}

void flag_few_violations(TestResult& result, long long violations) {
  // Chi-square asymptotics get shaky below a couple dozen events.
  if (violations < 20) result.flags.push_back("few_violations");
}

double validated_alpha(const risk::HitSequence& hits) {
  if (!(hits.alpha > 0.0 && hits.alpha < 1.0))
    throw DomainError("hit sequence carries a nominal rate outside (0, 1)");
  return hits.alpha;
}

// Bernoulli log-likelihood of `x` successes in `n` trials at rate pi.
double bernoulli_loglik(long long x, long long n, double pi) {
  return xlogy(static_cast<double>(x), pi) + xlogy(static_cast<double>(n - x), 1.0 - pi);
}

}  // namespace

bool TestResult::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

long long MarkovCounts::total() const {
  long long sum = 0;
  for (const auto& row : counts) sum += row[0] + row[1];
  return sum;
}

TestResult uc_test(const risk::HitSequence& hits) {
  if (hits.hits.empty()) throw EmptySequenceError("uc_test: empty hit sequence");
  const double alpha = validated_alpha(hits);
  const auto n = static_cast<long long>(hits.size());
  const long long violations = hits.count();
  const double pi_hat = static_cast<double>(violations) / static_cast<double>(n);

  TestResult result;
  result.name = "uc";
  result.df = 1;
  result.statistic =
      -2.0 * (bernoulli_loglik(violations, n, alpha) - bernoulli_loglik(violations, n, pi_hat));
  result.components["violations"] = static_cast<double>(violations);
  result.components["pi_hat"] = pi_hat;
  flag_few_violations(result, violations);
  finalize(result);
  return result;
}

SerialDependenceStats serial_dependence_stats(const risk::HitSequence& hits, int max_lag) {
  const auto n = hits.size();
  if (max_lag < 1) throw DomainError("serial_dependence_stats: max_lag must be >= 1");
  if (n <= static_cast<std::size_t>(max_lag) + 5)
    throw InsufficientDataError("serial_dependence_stats: series shorter than max_lag + 6");
  const double alpha = validated_alpha(hits);

  SerialDependenceStats out;
  out.max_lag = max_lag;
  out.n_effective = n;
  for (int w = 1; w <= max_lag; ++w) {
    const auto lag = static_cast<std::size_t>(w);
    const double m = std::sqrt(static_cast<double>(n - lag));
    double lead_mean = 0.0, trail_mean = 0.0;
    for (std::size_t t = lag; t < n; ++t) {
      lead_mean += hits.hits[t];
      trail_mean += hits.hits[t - lag];
    }
    lead_mean /= static_cast<double>(n - lag);
    trail_mean /= static_cast<double>(n - lag);

    double known = 0.0, centered = 0.0;
    for (std::size_t t = lag; t < n; ++t) {
      known += (hits.hits[t] - alpha) * (hits.hits[t - lag] - alpha);
      centered += (hits.hits[t] - lead_mean) * (hits.hits[t - lag] - trail_mean);
    }
    out.autocovariances.push_back(known / m);
    out.centered_stats.push_back(centered / m);
  }
  return out;
}

TestResult independence_portmanteau(const risk::HitSequence& hits, int max_lag) {
  const auto n = hits.size();
  if (max_lag < 1) throw DomainError("independence_portmanteau: max_lag must be >= 1");
  if (n <= static_cast<std::size_t>(max_lag) + 5)
    throw InsufficientDataError("independence_portmanteau: series shorter than max_lag + 6");
  validated_alpha(hits);

  TestResult result;
  result.name = "portmanteau";
  result.df = max_lag;

  const long long violations = hits.count();
  flag_few_violations(result, violations);
  if (violations == 0 || violations == static_cast<long long>(n)) {
    // A flat sequence has no autocorrelation to measure.
    result.flags.push_back("degenerate_hits");
    finalize(result);
    return result;
  }

  const double mean = static_cast<double>(violations) / static_cast<double>(n);
  double denom = 0.0;
  for (int h : hits.hits) denom += (h - mean) * (h - mean);

  double lb = 0.0;
  const double nd = static_cast<double>(n);
  for (int w = 1; w <= max_lag; ++w) {
    const auto lag = static_cast<std::size_t>(w);
    double cov = 0.0;
    for (std::size_t t = lag; t < n; ++t)
      cov += (hits.hits[t] - mean) * (hits.hits[t - lag] - mean);
    const double rho = cov / denom;
    result.components["rho_" + std::to_string(w)] = rho;
    lb += rho * rho / (nd - static_cast<double>(w));
  }
  result.statistic = nd * (nd + 2.0) * lb;
  finalize(result);
  return result;
}

MarkovCounts markov_counts(const risk::HitSequence& hits, int order) {
  if (order < 1) throw DomainError("markov_counts: order must be >= 1");
  const auto n = hits.size();
  if (n <= static_cast<std::size_t>(order) + 10)
    throw InsufficientDataError("markov_counts: series shorter than order + 11");

  MarkovCounts out;
  out.order = order;
  out.counts.assign(static_cast<std::size_t>(order) + 1, {0, 0});
  for (std::size_t t = static_cast<std::size_t>(order); t < n; ++t) {
    std::size_t klass = 0;
    for (int back = 1; back <= order; ++back) {
      if (hits.hits[t - static_cast<std::size_t>(back)] == 1) {
        klass = static_cast<std::size_t>(back);
        break;
      }
    }
    out.counts[klass][hits.hits[t] == 1 ? 1 : 0] += 1;
  }
  return out;
}

TestResult markov_from_counts(const MarkovCounts& counts, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("markov_from_counts: alpha must lie in (0, 1)");
  if (counts.order < 1 ||
      counts.counts.size() != static_cast<std::size_t>(counts.order) + 1)
    throw DomainError("markov_from_counts: counts do not match the stated order");

  long long total_hits = 0, total_days = 0;
  int observed = 0;
  double loglik_free = 0.0;
  for (const auto& row : counts.counts) {
    const long long days = row[0] + row[1];
    if (days < 0 || row[0] < 0 || row[1] < 0)
      throw DomainError("markov_from_counts: negative counts");
    if (days == 0) continue;
    ++observed;
    total_hits += row[1];
    total_days += days;
    const double rate = static_cast<double>(row[1]) / static_cast<double>(days);
    loglik_free += bernoulli_loglik(row[1], days, rate);
  }
  if (total_days == 0) throw EmptySequenceError("markov_from_counts: no observations");

  const double pi_hat = static_cast<double>(total_hits) / static_cast<double>(total_days);
  const double loglik_pooled = bernoulli_loglik(total_hits, total_days, pi_hat);
  const double loglik_nominal = bernoulli_loglik(total_hits, total_days, alpha);

  TestResult result;
  result.name = "markov";
  result.df = observed;  // free conditional rates vs zero free parameters
  result.statistic = -2.0 * (loglik_nominal - loglik_free);

  const double lr_ind = std::max(0.0, -2.0 * (loglik_pooled - loglik_free));
  const int df_ind = observed - 1;
  result.components["lr_independence"] = lr_ind;
  result.components["df_independence"] = static_cast<double>(df_ind);
  result.components["p_independence"] = chi2_pvalue(lr_ind, df_ind);
  result.components["lr_uc"] = std::max(0.0, -2.0 * (loglik_nominal - loglik_pooled));
  result.components["pi_hat"] = pi_hat;
  for (std::size_t i = 0; i < counts.counts.size(); ++i) {
    const long long days = counts.counts[i][0] + counts.counts[i][1];
    if (days > 0)
      result.components["rate_class_" + std::to_string(i)] =
          static_cast<double>(counts.counts[i][1]) / static_cast<double>(days);
  }

  if (observed < counts.order + 1) result.flags.push_back("unobserved_history");
  flag_few_violations(result, total_hits);
  finalize(result);
  return result;
}

TestResult markov_test(const risk::HitSequence& hits, int order) {
  return markov_from_counts(markov_counts(hits, order), validated_alpha(hits));
}

namespace {

struct Spell {
  long long duration = 0;  // days until the next violation, or days survived
  double v = 0.0;          // threshold magnitude when the spell started
  bool censored = false;   // true for the open spell after the last violation
};

// Censored-duration log-likelihood of the hazard a d^(b-1) exp(c v).
// Day hazards are clamped into (0, 1) so pathological parameter points get a
// finite (terrible) score instead of infinities that break the optimizer.
double hazard_loglik(double a, double b, double c, const std::vector<Spell>& spells,
                     const std::vector<double>& log_days) {
  const double ln_a = std::log(a);
  const double b1 = b - 1.0;
  double ll = 0.0;
  for (const auto& spell : spells) {
    const double cv = c * spell.v;
    for (long long j = 1; j < spell.duration; ++j) {
      const double h = std::clamp(std::exp(ln_a + b1 * log_days[static_cast<std::size_t>(j)] + cv),
                                  kHazardClamp, 1.0 - kHazardClamp);
      ll += std::log1p(-h);
    }
    const double h_last =
        std::clamp(std::exp(ln_a + b1 * log_days[static_cast<std::size_t>(spell.duration)] + cv),
                   kHazardClamp, 1.0 - kHazardClamp);
    ll += spell.censored ? std::log1p(-h_last) : std::log(h_last);
  }
  return ll;
}

double logit(double x) { return std::log(x / (1.0 - x)); }
double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

struct FitResult {
  double loglik = 0.0;
  std::vector<double> point;
  bool converged = true;
};

// Maximizes the log-likelihood over the transformed coordinates
// (logit a, ln b, ln(1+c)), restarting from each seed and keeping the best.
// Seeding the first restart at the nested optimum guarantees the fit never
// scores below the restricted model.
FitResult fit_hazard(const std::function<double(const std::vector<double>&)>& loglik,
                     const std::vector<std::vector<double>>& seeds) {
  FitResult best;
  bool first = true;
  for (const auto& seed : seeds) {
    SimplexOptions options;
    options.value_tolerance = 1e-10;
    const auto run = nelder_mead(
        [&](const std::vector<double>& t) { return -loglik(t); }, seed, options);
    if (first || -run.value > best.loglik) {
      best.loglik = -run.value;
      best.point = run.x;
      best.converged = run.converged;
      first = false;
    }
  }
  return best;
}

}  // namespace

TestResult geometric_var_test(const risk::HitSequence& hits, const risk::VarSeries& var) {
  const double alpha = validated_alpha(hits);
  if (hits.size() != var.size())
    throw DateMisalignmentError("geometric_var_test: hit and threshold lengths differ");
  for (std::size_t i = 0; i < hits.size(); ++i)
    if (hits.dates[i] != var.dates[i])
      throw DateMisalignmentError("geometric_var_test: hit and threshold dates differ at " +
                                  hits.dates[i].to_string());

  std::vector<std::size_t> hit_days;
  for (std::size_t t = 0; t < hits.size(); ++t)
    if (hits.hits[t] == 1) hit_days.push_back(t);
  if (hit_days.size() < 3)
    throw TooFewViolationsError("geometric_var_test: need at least 3 violations");

  // Spells run from one violation to the next; the stretch after the last
  // violation survives unfinished and is kept as a censored observation.
  std::vector<Spell> spells;
  long long max_duration = 1;
  long long total_days = 0;
  for (std::size_t g = 0; g + 1 < hit_days.size(); ++g) {
    Spell spell;
    spell.duration = static_cast<long long>(hit_days[g + 1] - hit_days[g]);
    spell.v = std::abs(var.var_values[hit_days[g] + 1]);
    spells.push_back(spell);
    max_duration = std::max(max_duration, spell.duration);
    total_days += spell.duration;
  }
  const auto complete = static_cast<long long>(spells.size());
  if (hit_days.back() + 1 < hits.size()) {
    Spell tail;
    tail.duration = static_cast<long long>(hits.size() - 1 - hit_days.back());
    tail.v = std::abs(var.var_values[hit_days.back() + 1]);
    tail.censored = true;
    spells.push_back(tail);
    max_duration = std::max(max_duration, tail.duration);
    total_days += tail.duration;
  }

  std::vector<double> log_days(static_cast<std::size_t>(max_duration) + 1, 0.0);
  for (std::size_t j = 1; j < log_days.size(); ++j)
    log_days[j] = std::log(static_cast<double>(j));

  const auto loglik_at = [&](double a, double b, double c) {
    return hazard_loglik(a, b, c, spells, log_days);
  };

  // Constant-hazard MLE has the closed form events / exposure-days.
  const double a_uc = std::clamp(static_cast<double>(complete) / static_cast<double>(total_days),
                                 kHazardClamp, 1.0 - kHazardClamp);
  const double ll_nominal = loglik_at(alpha, 1.0, 0.0);
  const double ll_level = loglik_at(a_uc, 1.0, 0.0);

  const auto duration_obj = [&](const std::vector<double>& t) {
    return loglik_at(sigmoid(t[0]), std::exp(t[1]), 0.0);
  };
  const auto full_obj = [&](const std::vector<double>& t) {
    return loglik_at(sigmoid(t[0]), std::exp(t[1]), std::max(0.0, std::exp(t[2]) - 1.0));
  };

  const double la = logit(a_uc);
  const auto duration_fit = fit_hazard(duration_obj, {{la, 0.0},
                                                      {la, std::log(0.5)},
                                                      {la, std::log(2.0)}});
  const double lb = duration_fit.point[1];
  const auto full_fit = fit_hazard(full_obj, {{duration_fit.point[0], lb, 0.0},
                                              {duration_fit.point[0], lb, std::log(6.0)},
                                              {duration_fit.point[0], lb, std::log(26.0)}});

  const double lr_uc = std::max(0.0, -2.0 * (ll_nominal - ll_level));
  const double lr_dind = std::max(0.0, -2.0 * (ll_level - duration_fit.loglik));
  const double lr_vind = std::max(0.0, -2.0 * (duration_fit.loglik - full_fit.loglik));

  TestResult result;
  result.name = "geometric";
  result.df = 3;
  result.statistic = lr_uc + lr_dind + lr_vind;
  result.components["lr_uc"] = lr_uc;
  result.components["lr_dind"] = lr_dind;
  result.components["lr_vind"] = lr_vind;
  result.components["p_uc"] = chi2_pvalue(lr_uc, 1);
  result.components["p_dind"] = chi2_pvalue(lr_dind, 1);
  result.components["p_vind"] = chi2_pvalue(lr_vind, 1);
  result.components["a_uc"] = a_uc;
  result.components["a_hat"] = sigmoid(full_fit.point[0]);
  result.components["b_hat"] = std::exp(full_fit.point[1]);
  result.components["c_hat"] = std::max(0.0, std::exp(full_fit.point[2]) - 1.0);
  result.components["violations"] = static_cast<double>(hit_days.size());
  result.components["complete_spells"] = static_cast<double>(complete);

  if (!duration_fit.converged || !full_fit.converged)
    result.flags.push_back("optimizer_not_converged");
  flag_few_violations(result, static_cast<long long>(hit_days.size()));
  finalize(result);
  return result;
}

}  // namespace sizebench::vartests
