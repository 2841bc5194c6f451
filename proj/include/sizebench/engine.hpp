#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sizebench/bars.hpp"
#include "sizebench/risk.hpp"
#include "sizebench/sizing.hpp"
#include "sizebench/vartests.hpp"

namespace sizebench::engine {

// ---------------------------------------------------------------------------
// Factor panels
// ---------------------------------------------------------------------------

// Cross-sectional factor values laid out dates x tickers. NaN marks a name
// that has no defined value on a date (indicator warmup, missing data); such
// names simply drop out of that date's ranking.
struct FactorPanel {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;  // rows follow `dates`, columns follow `tickers`
  int quantile_count = 10;
  std::vector<int> horizons{1, 5, 10};

  std::size_t rows() const { return dates.size(); }
  std::size_t cols() const { return tickers.size(); }
};

// Default alpha factor: per name, a mean-reversion composite of
// (50 - RSI) / 50 and the close's deviation from the Bollinger band
// midpoint, (0.5 - %B); the two pieces are z-scored across names on each
// date and averaged. High values mark oversold names.
FactorPanel make_default_factor(const std::vector<BarSeries>& universe, int rsi_window = 14,
                                int bollinger_window = 20, double bollinger_k = 2.0,
                                int quantile_count = 10);

// Forward simple close-to-close return over `horizon` bars, aligned to the
// panel's dates x tickers grid; NaN where the horizon runs past the data.
Eigen::MatrixXd forward_return_panel(const std::vector<BarSeries>& universe,
                                     const FactorPanel& panel, int horizon);

// ---------------------------------------------------------------------------
// Factor analytics
// ---------------------------------------------------------------------------

struct QuantileBucketStats {
  int horizon = 0;
  int quantile = 0;  // 1-based, 1 = lowest factor values
  double mean_return = 0.0;
  double stdev_return = 0.0;
  long long count = 0;
};

struct IcSeries {
  int horizon = 0;
  std::vector<Date> dates;
  std::vector<double> values;  // rank correlation factor vs forward return

  double mean() const;
};

// One point of a normal quantile-quantile comparison for an IC series.
struct QqPoint {
  double theoretical = 0.0;
  double sample = 0.0;
};

struct FactorAnalytics {
  std::vector<QuantileBucketStats> quantile_stats;
  std::vector<IcSeries> ic_series;              // one entry per horizon
  std::map<int, std::vector<QqPoint>> ic_qq;    // horizon -> sorted pairs
};

// Per-date quantile assignment plus per-quantile forward-return means and
// the daily information coefficient for every configured horizon. Dates
// without enough ranked names are skipped; if no date qualifies at all the
// panel is unusable and TooFewNamesError is thrown.
FactorAnalytics factor_analysis(const FactorPanel& factor,
                                const std::map<int, Eigen::MatrixXd>& forward_returns);

// ---------------------------------------------------------------------------
// Backtest configuration and report
// ---------------------------------------------------------------------------

enum class RebalanceFrequency { Daily, Weekly, Monthly };

RebalanceFrequency rebalance_from_string(const std::string& s);
std::string to_string(RebalanceFrequency frequency);

enum class BetaEstimator { Ols, Kalman };

struct BacktestConfig {
  double capital = 10'000'000.0;
  double commission_bps = 0.0;
  RebalanceFrequency rebalance = RebalanceFrequency::Weekly;
  risk::VarConfig var{};
  double rf_annual = 0.0;
  BetaEstimator beta_estimator = BetaEstimator::Ols;
  std::string benchmark_ticker;  // empty: equal-weight universe index
  int min_variance_window = 60;
  int vol_window = 60;
  std::vector<double> size_grid{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

struct PortfolioState {
  Date date;
  double cash = 0.0;
  std::map<std::string, double> positions;  // signed share counts
  double equity = 0.0;
  double peak_equity = 0.0;
};

struct MetricsResult {
  std::map<std::string, double> values;
  std::vector<std::string> flags;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  bool has_flag(const std::string& flag) const;
};

struct SizeVarEntry {
  double size_pct = 0.0;  // gross exposure scale relative to the run
  double max_var = 0.0;   // worst rolling loss threshold at that scale
};

struct BacktestReport {
  std::vector<Date> dates;  // marking dates (intersection calendar)
  std::vector<double> equity;
  std::vector<double> long_exposure;
  std::vector<double> short_exposure;
  std::vector<double> gross_exposure;
  std::vector<double> net_exposure;
  std::vector<double> commissions;  // paid on each date
  std::vector<PortfolioState> states;

  ReturnSeries daily_returns;       // close-to-close equity returns
  std::vector<double> rolling_vol;  // annualized, NaN during warmup

  risk::VarSeries var;    // empty when the history is too short
  risk::HitSequence hits;
  std::vector<vartests::TestResult> test_results;
  std::vector<SizeVarEntry> max_var_by_size;

  MetricsResult metrics;
  std::vector<std::string> flags;
  double initial_capital = 0.0;

  bool has_flag(const std::string& flag) const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Daily event loop over the intersection calendar of the universe. On each
// rebalance date names are ranked by the factor, the top and bottom
// quantiles form the long and short books, and the policy's target weights
// are queued for execution at the next day's open. Sizing uses the equity
// marked at that open, commissions are charged in basis points on traded
// notional, and marks happen at every close.
BacktestReport run_backtest(const std::vector<BarSeries>& universe, const FactorPanel& factor,
                            const sizing::SizingPolicy& policy, const BacktestConfig& config);

// Summary statistics of a daily return series: total return, annualized
// volatility and Sharpe, downside-only Sortino, and maximum drawdown.
// Undefined ratios are omitted from the map and flagged instead.
MetricsResult performance_metrics(const ReturnSeries& daily_returns, double rf_annual);

// Adds beta against the benchmark and the specific return: total return
// minus beta times the benchmark's total return.
MetricsResult performance_metrics(const ReturnSeries& daily_returns,
                                  const ReturnSeries& benchmark, double rf_annual,
                                  BetaEstimator estimator = BetaEstimator::Ols);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_report_json(std::ostream& out, const BacktestReport& report);
void write_equity_csv(std::ostream& out, const BacktestReport& report);
void write_exposures_csv(std::ostream& out, const BacktestReport& report);
void write_rolling_vol_csv(std::ostream& out, const BacktestReport& report);

// Distribution of portfolio returns at daily, weekly and monthly spans;
// the longer spans compound disjoint blocks of 5 and 21 trading days.
void write_return_quantiles_csv(std::ostream& out, const BacktestReport& report);

void write_ic_csv(std::ostream& out, const FactorAnalytics& analytics);
void write_quantile_stats_csv(std::ostream& out, const FactorAnalytics& analytics);

}  // namespace sizebench::engine
