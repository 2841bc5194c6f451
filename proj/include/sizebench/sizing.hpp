#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace sizebench::sizing {

// ---------------------------------------------------------------------------
// Kelly criterion for the symmetric win/lose game
// ---------------------------------------------------------------------------

// Bet parameters: win probability p, staked fraction g, starting capital.
struct KellyParams {
  double p = 0.5;
  double g = 0.0;
  double capital0 = 0.0;
  double q() const { return 1.0 - p; }
};

// Expected log growth rate gamma(g) = p ln(1+g) + (1-p) ln(1-g).
double kelly_growth(double p, double g);

struct KellyOptimum {
  double g_star = 0.0;      // optimal staked fraction, p - q
  double gamma_star = 0.0;  // growth at the optimum, p ln p + q ln q + ln 2
};

// Closed-form optimum for 0.5 < p <= 1. At p = 1 the q ln q term is taken
// as its limit 0.
KellyOptimum kelly_optimal(double p);

// Capital after `trials` bets of fixed fraction g, `wins` of them won:
// C_n = C_0 (1+g)^m (1-g)^(n-m).
double kelly_capital_path(const KellyParams& params, int wins, int trials);

// ---------------------------------------------------------------------------
// Book construction
// ---------------------------------------------------------------------------

struct WeightVector {
  std::vector<std::string> tickers;
  std::vector<double> weights;  // signed fractions of equity

  double gross() const;
  double net() const;
};

// Fully-invested minimum-variance weights w = inv(S) 1 / (1' inv(S) 1).
// A positive-semidefinite but singular matrix gets one ridge attempt
// (1e-8 * trace/k added to the diagonal) before giving up.
WeightVector min_variance_weights(const Eigen::MatrixXd& cov,
                                  const std::vector<std::string>& tickers);

enum class PolicyKind { FixedFraction, Kelly, MinVariance };

PolicyKind policy_kind_from_string(const std::string& s);
std::string to_string(PolicyKind kind);

struct SizingPolicy {
  PolicyKind kind = PolicyKind::FixedFraction;
  double long_pct = 0.10;
  double short_pct = 0.10;
  std::map<std::string, double> params;  // kelly_p, lookback, ...
};

// Enforces pct ranges and the gross-exposure cap.
void validate_policy(const SizingPolicy& policy, double gross_cap = 1.5);

// Equal-split allocation: long_pct across ranked_longs, -short_pct across
// ranked_shorts, as fractions of equity. Kelly policies scale both book
// percentages by the optimal fraction g* derived from params["kelly_p"].
// Minimum-variance policies get their long book re-weighted by the engine,
// which owns the covariance estimate; here they allocate like fixed
// fractions.
WeightVector target_positions(const SizingPolicy& policy,
                              const std::vector<std::string>& ranked_longs,
                              const std::vector<std::string>& ranked_shorts, double equity);

}  // namespace sizebench::sizing
