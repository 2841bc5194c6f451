#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "sizebench/bars.hpp"
#include "sizebench/dates.hpp"

namespace sizebench::kalman {

// ---------------------------------------------------------------------------
// Linear-Gaussian state-space filtering with a scalar measurement:
//   y_t = Z_t x_t + d + eps_t,   eps_t ~ N(0, H)
//   x_t = T x_{t-1} + c + eta_t, eta_t ~ N(0, Q)
// The workhorse application is the two-state market model with state
// [alpha_t, beta_t] and design row [1, market_return_t].
// ---------------------------------------------------------------------------

struct KalmanModel {
  Eigen::MatrixXd T;   // state transition
  Eigen::VectorXd c;   // state offset
  double d = 0.0;      // measurement offset
  double H = 0.0;      // measurement noise variance, >= 0
  Eigen::MatrixXd Q;   // state noise covariance
  Eigen::VectorXd x0;  // initial state mean
  Eigen::MatrixXd P0;  // initial state covariance

  // Filled in by estimate_noise_ml.
  double fitted_loglik = 0.0;
  bool optimizer_converged = true;

  Eigen::Index state_dim() const { return x0.size(); }
};

// Random-walk alpha/beta model with a diffuse prior: T = I, c = 0, d = 0,
// x0 = 0, P0 = 1e6 I, Q = diag(q_alpha, q_beta).
KalmanModel make_dynamic_beta_model(double h, double q_alpha, double q_beta);

struct KalmanState {
  Eigen::VectorXd x_pred;
  Eigen::MatrixXd P_pred;
  double v = 0.0;  // innovation
  double F = 0.0;  // innovation variance
  Eigen::VectorXd x_filt;
  Eigen::MatrixXd P_filt;
};

struct FilterResult {
  std::vector<KalmanState> states;
  double loglik = 0.0;
  // True when some innovation variance had to be floored at 1e-12 to keep
  // the gain divisions finite.
  bool innovation_floored = false;
};

// One filtering pass. `designs` holds one measurement row per observation.
// The prediction step runs before the first update, so the time-0 prior is
// T x0 + c with covariance T P0 T' + Q. The log-likelihood is the exact
// joint Gaussian density of the observations under the model.
FilterResult kalman_filter(const KalmanModel& model, const std::vector<double>& y,
                           const Eigen::MatrixXd& designs);

// Lag-1 autocorrelation of the standardized innovations v/sqrt(F), skipping
// `burn_in` startup steps where the diffuse prior dominates. Near zero when
// the model is correctly specified.
double innovation_autocorr(const FilterResult& result, std::size_t burn_in = 10);

enum class NoiseStructure { DynamicBeta };

// Maximum-likelihood fit of the noise variances (H and the diagonal of Q)
// for the random-walk structure, by simplex search over log variances from
// three deterministic starts. Transition, offsets and the diffuse prior
// stay fixed. Non-convergence is reported on the returned model rather than
// thrown; the best point found is kept.
KalmanModel estimate_noise_ml(const std::vector<double>& y, const Eigen::MatrixXd& designs,
                              NoiseStructure structure = NoiseStructure::DynamicBeta);

struct BetaPath {
  std::vector<Date> dates;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> beta_se;  // sqrt of the filtered beta variance

  std::size_t size() const { return dates.size(); }
};

// Filtered alpha/beta path for a stock against a market series on an
// identical calendar. Fits the noise model first unless one is supplied.
BetaPath dynamic_beta(const ReturnSeries& stock, const ReturnSeries& market);
BetaPath dynamic_beta(const ReturnSeries& stock, const ReturnSeries& market,
                      const KalmanModel& model);

// Writes "date,alpha,beta,beta_se" rows.
void write_beta_csv(std::ostream& out, const BetaPath& path);

}  // namespace sizebench::kalman
