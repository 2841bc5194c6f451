#include "sizebench/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "sizebench/errors.hpp"
#include "sizebench/optimize.hpp"
#include "sizebench/stats.hpp"

namespace sizebench::kalman {

namespace {

constexpr double kInnovationFloor = 1e-12;
constexpr double kDiffusePrior = 1e6;

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NonSymmetricError(std::string(what) + " must be symmetric");
}

void validate_model(const KalmanModel& model, const std::vector<double>& y,
                    const Eigen::MatrixXd& designs) {
  const auto k = model.state_dim();
  if (k < 1) throw DomainError("kalman: empty state");
  if (model.T.rows() != k || model.T.cols() != k || model.Q.rows() != k || model.Q.cols() != k ||
      model.P0.rows() != k || model.P0.cols() != k || model.c.size() != k)
    throw DomainError("kalman: model dimensions are inconsistent");
  if (designs.cols() != k || designs.rows() != static_cast<Eigen::Index>(y.size()))
    throw DomainError("kalman: design matrix does not match observations and state");
  if (!(model.H >= 0.0)) throw DomainError("kalman: measurement variance must be >= 0");
  if (!model.T.allFinite() || !model.Q.allFinite() || !model.P0.allFinite() ||
      !model.c.allFinite() || !model.x0.allFinite() || !std::isfinite(model.d) ||
      !std::isfinite(model.H))
    throw NonFiniteInputError("kalman: model has non-finite entries");
  if (!designs.allFinite()) throw NonFiniteInputError("kalman: designs have non-finite entries");
  for (double v : y)
    if (!std::isfinite(v)) throw NonFiniteInputError("kalman: observations have non-finite entries");
  check_symmetric(model.Q, "kalman: Q");
  check_symmetric(model.P0, "kalman: P0");
}

}  // namespace

KalmanModel make_dynamic_beta_model(double h, double q_alpha, double q_beta) {
  KalmanModel model;
  model.T = Eigen::MatrixXd::Identity(2, 2);
  model.c = Eigen::VectorXd::Zero(2);
  model.H = h;
  model.Q = Eigen::MatrixXd::Zero(2, 2);
  model.Q(0, 0) = q_alpha;
  model.Q(1, 1) = q_beta;
  model.x0 = Eigen::VectorXd::Zero(2);
  model.P0 = kDiffusePrior * Eigen::MatrixXd::Identity(2, 2);
  return model;
}

FilterResult kalman_filter(const KalmanModel& model, const std::vector<double>& y,
                           const Eigen::MatrixXd& designs) {
  validate_model(model, y, designs);
  const auto n = y.size();

  FilterResult out;
  out.states.reserve(n);
  Eigen::VectorXd x = model.x0;
  Eigen::MatrixXd p = model.P0;

  for (std::size_t t = 0; t < n; ++t) {
    KalmanState s;
    s.x_pred = model.T * x + model.c;
    s.P_pred = model.T * p * model.T.transpose() + model.Q;
    s.P_pred = 0.5 * (s.P_pred + s.P_pred.transpose()).eval();

    const Eigen::RowVectorXd z = designs.row(static_cast<Eigen::Index>(t));
    s.v = y[t] - z.dot(s.x_pred) - model.d;
    double f = (z * s.P_pred * z.transpose())(0) + model.H;
    if (!std::isfinite(f) || f < 0.0)
      throw SingularInnovationError("kalman: innovation variance is negative or non-finite");
    if (f < kInnovationFloor) {
      f = kInnovationFloor;
      out.innovation_floored = true;
    }
    s.F = f;

    const Eigen::VectorXd gain = s.P_pred * z.transpose() / f;
    s.x_filt = s.x_pred + gain * s.v;
    s.P_filt = s.P_pred - gain * (z * s.P_pred);
    s.P_filt = 0.5 * (s.P_filt + s.P_filt.transpose()).eval();

    out.loglik += -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(f) + s.v * s.v / f);
    x = s.x_filt;
    p = s.P_filt;
    out.states.push_back(std::move(s));
  }
  return out;
}

double innovation_autocorr(const FilterResult& result, std::size_t burn_in) {
  if (result.states.size() < burn_in + 3)
    throw InsufficientDataError("innovation_autocorr: too few post-burn-in innovations");
  std::vector<double> u;
  u.reserve(result.states.size() - burn_in);
  for (std::size_t t = burn_in; t < result.states.size(); ++t)
    u.push_back(result.states[t].v / std::sqrt(result.states[t].F));
  const std::span<const double> all(u);
  return stats::pearson_correlation(all.subspan(0, u.size() - 1), all.subspan(1));
}

KalmanModel estimate_noise_ml(const std::vector<double>& y, const Eigen::MatrixXd& designs,
                              NoiseStructure structure) {
  if (structure != NoiseStructure::DynamicBeta)
    throw UnknownKindError("estimate_noise_ml: unsupported structure");
  if (y.size() < 30) throw InsufficientDataError("estimate_noise_ml: need at least 30 observations");
  if (designs.cols() != 2)
    throw DomainError("estimate_noise_ml: the random-walk structure expects two design columns");

  const double vy = std::max(1e-12, stats::stdev(y) * stats::stdev(y));

  const auto objective = [&](const std::vector<double>& theta) {
    const auto model = make_dynamic_beta_model(std::exp(theta[0]), std::exp(theta[1]),
                                               std::exp(theta[2]));
    return -kalman_filter(model, y, designs).loglik;
  };

  // Log-variance coordinates keep every candidate positive; the starts span
  // "mostly measurement noise" through "meaningfully drifting states".
  const std::vector<std::vector<double>> seeds = {
      {std::log(vy), std::log(vy) - 8.0, std::log(vy) - 8.0},
      {std::log(vy * 0.5), std::log(vy) - 16.0, std::log(vy) - 16.0},
      {std::log(vy * 0.25), std::log(vy) - 4.0, std::log(vy) - 4.0},
  };

  SimplexOptions options;
  options.max_iterations = 3000;
  bool have_best = false;
  SimplexResult best;
  for (const auto& seed : seeds) {
    const auto run = nelder_mead(objective, seed, options);
    if (!have_best || run.value < best.value) {
      best = run;
      have_best = true;
    }
  }

  auto model = make_dynamic_beta_model(std::exp(best.x[0]), std::exp(best.x[1]),
                                       std::exp(best.x[2]));
  model.fitted_loglik = -best.value;
  model.optimizer_converged = best.converged;
  return model;
}

namespace {

void check_alignment(const ReturnSeries& stock, const ReturnSeries& market) {
  if (stock.dates.size() != market.dates.size())
    throw DateMisalignmentError("dynamic_beta: stock and market calendars differ in length");
  for (std::size_t i = 0; i < stock.dates.size(); ++i)
    if (stock.dates[i] != market.dates[i])
      throw DateMisalignmentError("dynamic_beta: calendars differ at " +
                                  stock.dates[i].to_string());
  if (stock.values.size() < 30)
    throw InsufficientDataError("dynamic_beta: need at least 30 aligned returns");
}

Eigen::MatrixXd beta_designs(const ReturnSeries& market) {
  Eigen::MatrixXd designs(static_cast<Eigen::Index>(market.values.size()), 2);
  for (std::size_t t = 0; t < market.values.size(); ++t) {
    designs(static_cast<Eigen::Index>(t), 0) = 1.0;
    designs(static_cast<Eigen::Index>(t), 1) = market.values[t];
  }
  return designs;
}

BetaPath path_from_filter(const ReturnSeries& stock, const FilterResult& filtered) {
  BetaPath path;
  path.dates = stock.dates;
  path.alpha.reserve(filtered.states.size());
  path.beta.reserve(filtered.states.size());
  path.beta_se.reserve(filtered.states.size());
  for (const auto& s : filtered.states) {
    path.alpha.push_back(s.x_filt(0));
    path.beta.push_back(s.x_filt(1));
    path.beta_se.push_back(std::sqrt(std::max(0.0, s.P_filt(1, 1))));
  }
  return path;
}

}  // namespace

BetaPath dynamic_beta(const ReturnSeries& stock, const ReturnSeries& market) {
  check_alignment(stock, market);
  const auto designs = beta_designs(market);
  const auto model = estimate_noise_ml(stock.values, designs);
  return path_from_filter(stock, kalman_filter(model, stock.values, designs));
}

BetaPath dynamic_beta(const ReturnSeries& stock, const ReturnSeries& market,
                      const KalmanModel& model) {
  check_alignment(stock, market);
  const auto designs = beta_designs(market);
  return path_from_filter(stock, kalman_filter(model, stock.values, designs));
}

void write_beta_csv(std::ostream& out, const BetaPath& path) {
  out << "date,alpha,beta,beta_se\n";
  char buf[64];
  for (std::size_t t = 0; t < path.size(); ++t) {
    out << path.dates[t].to_string();
    for (double v : {path.alpha[t], path.beta[t], path.beta_se[t]}) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace sizebench::kalman
