#include "sizebench/sizing.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_set>

#include "sizebench/errors.hpp"

namespace sizebench::sizing {

double kelly_growth(double p, double g) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("kelly_growth: p must lie in (0, 1)");
  if (!(std::abs(g) < 1.0)) throw DomainError("kelly_growth: |g| must be < 1");
  return p * std::log1p(g) + (1.0 - p) * std::log1p(-g);
}

KellyOptimum kelly_optimal(double p) {
  if (!(p > 0.5 && p <= 1.0)) throw DomainError("kelly_optimal: p must lie in (0.5, 1]");
  const double q = 1.0 - p;
  KellyOptimum opt;
  opt.g_star = p - q;
  // q ln q -> 0 as q -> 0, so the p = 1 endpoint is ln 2.
  opt.gamma_star = p * std::log(p) + (q > 0.0 ? q * std::log(q) : 0.0) + std::log(2.0);
  return opt;
}

double kelly_capital_path(const KellyParams& params, int wins, int trials) {
  if (wins < 0 || trials < 0 || wins > trials)
    throw DomainError("kelly_capital_path: need 0 <= wins <= trials");
  if (!(std::abs(params.g) < 1.0)) throw DomainError("kelly_capital_path: |g| must be < 1");
  return params.capital0 * std::pow(1.0 + params.g, wins) *
         std::pow(1.0 - params.g, trials - wins);
}

double WeightVector::gross() const {
  double total = 0.0;
  for (double w : weights) total += std::abs(w);
  return total;
}

double WeightVector::net() const {
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

namespace {

// Solves S w = 1 with Cholesky and normalizes to sum one. Returns false if
// the factorization reports the matrix is not positive definite.
bool solve_min_variance(const Eigen::MatrixXd& cov, Eigen::VectorXd& out) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(cov.rows());
  const Eigen::VectorXd raw = llt.solve(ones);
  const double denom = raw.sum();
  if (!std::isfinite(denom) || denom <= 0.0 || !raw.allFinite()) return false;
  out = raw / denom;
  return true;
}

}  // namespace

WeightVector min_variance_weights(const Eigen::MatrixXd& cov,
                                  const std::vector<std::string>& tickers) {
  const auto k = cov.rows();
  if (k < 1 || cov.cols() != k) throw DomainError("min_variance_weights: need a square matrix, k >= 1");
  if (static_cast<std::size_t>(k) != tickers.size())
    throw DomainError("min_variance_weights: ticker count does not match matrix size");
  if (!cov.allFinite()) throw NonFiniteInputError("min_variance_weights: covariance has non-finite entries");
  const double scale = cov.cwiseAbs().maxCoeff();
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
    throw NonSymmetricError("min_variance_weights: covariance is not symmetric");

  Eigen::VectorXd w;
  if (!solve_min_variance(cov, w)) {
    // One ridge attempt rescues semidefinite estimates (short windows,
    // duplicated columns); anything it cannot fix is genuinely bad input.
    const double ridge = 1e-8 * cov.trace() / static_cast<double>(k);
    Eigen::MatrixXd bumped = cov;
    bumped.diagonal().array() += ridge;
    if (ridge <= 0.0 || !solve_min_variance(bumped, w))
      throw SingularCovarianceError("min_variance_weights: covariance is not positive definite");
  }

  WeightVector result;
  result.tickers = tickers;
  result.weights.assign(w.data(), w.data() + k);
  return result;
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "fixed_fraction") return PolicyKind::FixedFraction;
  if (s == "kelly") return PolicyKind::Kelly;
  if (s == "min_variance") return PolicyKind::MinVariance;
  throw UnknownKindError("unknown sizing policy: " + s);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FixedFraction: return "fixed_fraction";
    case PolicyKind::Kelly: return "kelly";
    case PolicyKind::MinVariance: return "min_variance";
  }
  throw DomainError("to_string: invalid PolicyKind");
}

void validate_policy(const SizingPolicy& policy, double gross_cap) {
  if (!(policy.long_pct >= 0.0 && policy.long_pct <= 1.0))
    throw DomainError("sizing policy: long_pct must lie in [0, 1]");
  if (!(policy.short_pct >= 0.0 && policy.short_pct <= 1.0))
    throw DomainError("sizing policy: short_pct must lie in [0, 1]");
  if (policy.long_pct + policy.short_pct > gross_cap)
    throw DomainError("sizing policy: long_pct + short_pct exceeds the gross exposure cap");
  if (policy.kind == PolicyKind::Kelly && !policy.params.count("kelly_p"))
    throw MissingParamError("sizing policy: kelly requires params[\"kelly_p\"]");
}

WeightVector target_positions(const SizingPolicy& policy,
                              const std::vector<std::string>& ranked_longs,
                              const std::vector<std::string>& ranked_shorts, double equity) {
  if (!(equity > 0.0) || !std::isfinite(equity))
    throw DomainError("target_positions: equity must be positive");
  std::unordered_set<std::string> seen(ranked_longs.begin(), ranked_longs.end());
  for (const auto& t : ranked_shorts)
    if (seen.count(t)) throw DomainError("target_positions: ticker on both books: " + t);

  double long_pct = policy.long_pct;
  double short_pct = policy.short_pct;
  if (policy.kind == PolicyKind::Kelly) {
    auto it = policy.params.find("kelly_p");
    if (it == policy.params.end())
      throw MissingParamError("target_positions: kelly requires params[\"kelly_p\"]");
    const double scale = kelly_optimal(it->second).g_star;
    long_pct *= scale;
    short_pct *= scale;
  }

  WeightVector out;
  if (!ranked_longs.empty()) {
    const double w = long_pct / static_cast<double>(ranked_longs.size());
    for (const auto& t : ranked_longs) {
      out.tickers.push_back(t);
      out.weights.push_back(w);
    }
  }
  if (!ranked_shorts.empty()) {
    const double w = -short_pct / static_cast<double>(ranked_shorts.size());
    for (const auto& t : ranked_shorts) {
      out.tickers.push_back(t);
      out.weights.push_back(w);
    }
  }
  return out;
}

}  // namespace sizebench::sizing
