#include "sizebench/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <unordered_map>

#include "json.hpp"

#include "sizebench/errors.hpp"
#include "sizebench/indicators.hpp"
#include "sizebench/kalman.hpp"
#include "sizebench/stats.hpp"

namespace sizebench::engine {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTradingDays = 252.0;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Ordinal ranking used for quantile bucketing: ties resolved by ticker
// order so the assignment is deterministic.
struct RankedName {
  double value;
  std::size_t column;
};

// Bucket index in 0..q-1 for the i-th of n ranked names, balanced up to
// rounding.
int bucket_of(std::size_t i, std::size_t n, int q) {
  return static_cast<int>((i * static_cast<std::size_t>(q)) / n);
}

double compound(std::span<const double> returns) {
  double wealth = 1.0;
  for (double r : returns) wealth *= 1.0 + r;
  return wealth - 1.0;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  const double xm = stats::mean(x);
  const double ym = stats::mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  if (sxx == 0.0) return kNaN;
  return sxy / sxx;
}

}  // namespace

// ---------------------------------------------------------------------------
// Factor panels
// ---------------------------------------------------------------------------

FactorPanel make_default_factor(const std::vector<BarSeries>& universe, int rsi_window,
                                int bollinger_window, double bollinger_k, int quantile_count) {
  if (universe.empty()) throw EmptyUniverseError("factor universe is empty");
  if (quantile_count < 1) throw DomainError("quantile count must be at least 1");

  FactorPanel panel;
  panel.quantile_count = quantile_count;

  // All series are kept on their own calendars here; the panel uses the
  // union of dates and leaves NaN where a name has no bar or no warm value.
  std::set<Date> all_dates;
  for (const auto& series : universe) {
    if (series.empty()) throw EmptySeriesError(series.ticker);
    panel.tickers.push_back(series.ticker);
    for (const auto& bar : series.bars) all_dates.insert(bar.date);
  }
  std::sort(panel.tickers.begin(), panel.tickers.end());
  panel.dates.assign(all_dates.begin(), all_dates.end());

  std::map<Date, Eigen::Index> row_of;
  for (std::size_t i = 0; i < panel.dates.size(); ++i)
    row_of[panel.dates[i]] = static_cast<Eigen::Index>(i);
  std::map<std::string, Eigen::Index> col_of;
  for (std::size_t j = 0; j < panel.tickers.size(); ++j)
    col_of[panel.tickers[j]] = static_cast<Eigen::Index>(j);

  Eigen::MatrixXd rsi_part = Eigen::MatrixXd::Constant(
      static_cast<Eigen::Index>(panel.rows()), static_cast<Eigen::Index>(panel.cols()), kNaN);
  Eigen::MatrixXd band_part = rsi_part;

  for (const auto& series : universe) {
    const auto dates = series.dates();
    const auto closes = series.closes();
    const auto col = col_of.at(series.ticker);
    const auto rsi = indicators::rsi(dates, closes, rsi_window);
    const auto bands = indicators::bollinger(dates, closes, bollinger_window, bollinger_k);
    const auto& rsi_values = rsi.channels.front().second;
    const auto& upper = bands.channel("upper");
    const auto& lower = bands.channel("lower");
    for (std::size_t t = 0; t < dates.size(); ++t) {
      const auto row = row_of.at(dates[t]);
      if (std::isfinite(rsi_values[t])) rsi_part(row, col) = (50.0 - rsi_values[t]) / 50.0;
      const double width = upper[t] - lower[t];
      if (std::isfinite(width) && width > 0.0)
        band_part(row, col) = 0.5 - (closes[t] - lower[t]) / width;
    }
  }

  // Cross-sectional z-score of each piece per date, then the average of
  // whatever pieces a name has defined.
  panel.values = Eigen::MatrixXd::Constant(rsi_part.rows(), rsi_part.cols(), kNaN);
  for (Eigen::Index row = 0; row < rsi_part.rows(); ++row) {
    for (Eigen::MatrixXd* part : {&rsi_part, &band_part}) {
      std::vector<double> defined;
      for (Eigen::Index j = 0; j < part->cols(); ++j)
        if (std::isfinite((*part)(row, j))) defined.push_back((*part)(row, j));
      if (defined.size() < 2) {
        for (Eigen::Index j = 0; j < part->cols(); ++j) (*part)(row, j) = kNaN;
        continue;
      }
      const double m = stats::mean(defined);
      const double s = stats::stdev(defined);
      for (Eigen::Index j = 0; j < part->cols(); ++j) {
        if (!std::isfinite((*part)(row, j))) continue;
        (*part)(row, j) = s > 0.0 ? ((*part)(row, j) - m) / s : 0.0;
      }
    }
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
      const double a = rsi_part(row, j);
      const double b = band_part(row, j);
      if (std::isfinite(a) && std::isfinite(b))
        panel.values(row, j) = 0.5 * (a + b);
      else if (std::isfinite(a))
        panel.values(row, j) = a;
      else if (std::isfinite(b))
        panel.values(row, j) = b;
    }
  }
  return panel;
}

Eigen::MatrixXd forward_return_panel(const std::vector<BarSeries>& universe,
                                     const FactorPanel& panel, int horizon) {
  if (horizon < 1) throw DomainError("forward-return horizon must be positive");

  std::map<std::string, const BarSeries*> by_ticker;
  for (const auto& series : universe) by_ticker[series.ticker] = &series;

  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(panel.rows()),
                                                  static_cast<Eigen::Index>(panel.cols()), kNaN);
  for (std::size_t j = 0; j < panel.cols(); ++j) {
    const auto it = by_ticker.find(panel.tickers[j]);
    if (it == by_ticker.end()) continue;
    const auto& bars = it->second->bars;
    std::map<Date, std::size_t> index_of;
    for (std::size_t t = 0; t < bars.size(); ++t) index_of[bars[t].date] = t;
    for (std::size_t row = 0; row < panel.rows(); ++row) {
      const auto pos = index_of.find(panel.dates[row]);
      if (pos == index_of.end()) continue;
      const std::size_t t = pos->second;
      if (t + static_cast<std::size_t>(horizon) >= bars.size()) continue;
      const double base = bars[t].close;
      if (base <= 0.0)
        throw NonPositivePriceError("nonpositive close for " + panel.tickers[j] + " on " +
                                    panel.dates[row].to_string());
      out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
          bars[t + static_cast<std::size_t>(horizon)].close / base - 1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factor analytics
// ---------------------------------------------------------------------------

double IcSeries::mean() const {
  if (values.empty()) return kNaN;
  return stats::mean(values);
}

FactorAnalytics factor_analysis(const FactorPanel& factor,
                                const std::map<int, Eigen::MatrixXd>& forward_returns) {
  if (factor.cols() < 2)
    throw TooFewNamesError("factor analysis needs at least 2 names, got " +
                           std::to_string(factor.cols()));
  if (factor.quantile_count < 1) throw DomainError("quantile count must be at least 1");

  FactorAnalytics analytics;
  const int q = factor.quantile_count;

  for (const auto& [horizon, forward] : forward_returns) {
    if (forward.rows() != static_cast<Eigen::Index>(factor.rows()) ||
        forward.cols() != static_cast<Eigen::Index>(factor.cols()))
      throw DomainError("forward-return panel shape does not match the factor panel");

    std::vector<std::vector<double>> bucket_returns(static_cast<std::size_t>(q));
    IcSeries ic;
    ic.horizon = horizon;

    for (std::size_t row = 0; row < factor.rows(); ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      std::vector<double> f_valid, fwd_valid;
      std::vector<RankedName> ranked;
      for (Eigen::Index j = 0; j < forward.cols(); ++j) {
        if (!std::isfinite(factor.values(r, j)) || !std::isfinite(forward(r, j))) continue;
        ranked.push_back({factor.values(r, j), static_cast<std::size_t>(j)});
        f_valid.push_back(factor.values(r, j));
        fwd_valid.push_back(forward(r, j));
      }
      if (ranked.size() < static_cast<std::size_t>(q) || ranked.size() < 2) continue;

      std::sort(ranked.begin(), ranked.end(), [](const RankedName& a, const RankedName& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.column < b.column;
      });
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        const int bucket = bucket_of(i, ranked.size(), q);
        bucket_returns[static_cast<std::size_t>(bucket)].push_back(
            forward(r, static_cast<Eigen::Index>(ranked[i].column)));
      }

      // A fully tied factor has no ranking information and produces an
      // undefined correlation; such dates stay out of the IC series.
      const double ic_value = stats::spearman_correlation(f_valid, fwd_valid);
      if (std::isfinite(ic_value)) {
        ic.dates.push_back(factor.dates[row]);
        ic.values.push_back(ic_value);
      }
    }

    if (ic.dates.empty())
      throw TooFewNamesError("no date carries at least " + std::to_string(q) +
                             " ranked names at horizon " + std::to_string(horizon));

    for (int b = 0; b < q; ++b) {
      const auto& returns = bucket_returns[static_cast<std::size_t>(b)];
      QuantileBucketStats stats_row;
      stats_row.horizon = horizon;
      stats_row.quantile = b + 1;
      stats_row.count = static_cast<long long>(returns.size());
      stats_row.mean_return = returns.empty() ? kNaN : stats::mean(returns);
      stats_row.stdev_return = returns.size() < 2 ? kNaN : stats::stdev(returns);
      analytics.quantile_stats.push_back(stats_row);
    }

    // Normal quantile pairs for eyeballing how Gaussian the IC series is.
    std::vector<double> sorted_ic = ic.values;
    std::sort(sorted_ic.begin(), sorted_ic.end());
    std::vector<QqPoint> qq;
    for (std::size_t i = 0; i < sorted_ic.size(); ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(sorted_ic.size());
      qq.push_back({stats::normal_quantile(p), sorted_ic[i]});
    }
    analytics.ic_qq[horizon] = std::move(qq);
    analytics.ic_series.push_back(std::move(ic));
  }
  return analytics;
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

RebalanceFrequency rebalance_from_string(const std::string& s) {
  if (s == "daily") return RebalanceFrequency::Daily;
  if (s == "weekly") return RebalanceFrequency::Weekly;
  if (s == "monthly") return RebalanceFrequency::Monthly;
  throw UnknownKindError("unknown rebalance frequency: " + s);
}

std::string to_string(RebalanceFrequency frequency) {
  switch (frequency) {
    case RebalanceFrequency::Daily: return "daily";
    case RebalanceFrequency::Weekly: return "weekly";
    case RebalanceFrequency::Monthly: return "monthly";
  }
  throw UnknownKindError("unmapped rebalance frequency value");
}

namespace {

int stride_of(RebalanceFrequency frequency) {
  switch (frequency) {
    case RebalanceFrequency::Daily: return 1;
    case RebalanceFrequency::Weekly: return 5;
    case RebalanceFrequency::Monthly: return 21;
  }
  return 5;
}

}  // namespace

bool MetricsResult::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

bool BacktestReport::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

// ---------------------------------------------------------------------------
// Performance metrics
// ---------------------------------------------------------------------------

MetricsResult performance_metrics(const ReturnSeries& daily_returns, double rf_annual) {
  const auto& r = daily_returns.values;
  if (r.size() < 2)
    throw InsufficientDataError("performance metrics need at least 2 returns, got " +
                                std::to_string(r.size()));
  for (double v : r)
    if (!std::isfinite(v)) throw NonFiniteInputError("daily returns");

  MetricsResult result;
  const double rf_daily = rf_annual / kTradingDays;

  result.values["total_return"] = compound(r);

  std::vector<double> excess(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) excess[i] = r[i] - rf_daily;
  const double excess_mean = stats::mean(excess);
  const double sd = stats::stdev(excess);

  result.values["volatility"] = stats::stdev(r) * std::sqrt(kTradingDays);
  if (sd > 0.0) {
    result.values["sharpe"] = excess_mean / sd * std::sqrt(kTradingDays);
  } else {
    result.flags.push_back("zero_volatility");
  }

  double downside_sq = 0.0;
  for (double e : excess) downside_sq += std::min(e, 0.0) * std::min(e, 0.0);
  const double downside = std::sqrt(downside_sq / static_cast<double>(excess.size()));
  if (downside > 0.0) {
    result.values["sortino"] = excess_mean / downside * std::sqrt(kTradingDays);
  } else {
    result.flags.push_back("no_downside");
  }

  // Peak-to-trough decline on the compounded wealth path, with the starting
  // stake acting as the first peak.
  double wealth = 1.0, peak = 1.0, max_dd = 0.0;
  for (double v : r) {
    wealth *= 1.0 + v;
    peak = std::max(peak, wealth);
    max_dd = std::max(max_dd, (peak - wealth) / peak);
  }
  result.values["max_drawdown"] = max_dd;
  return result;
}

MetricsResult performance_metrics(const ReturnSeries& daily_returns,
                                  const ReturnSeries& benchmark, double rf_annual,
                                  BetaEstimator estimator) {
  if (daily_returns.size() != benchmark.size())
    throw DateMisalignmentError("benchmark length " + std::to_string(benchmark.size()) +
                                " does not match " + std::to_string(daily_returns.size()) +
                                " portfolio returns");
  for (std::size_t i = 0; i < daily_returns.size(); ++i)
    if (daily_returns.dates[i] != benchmark.dates[i])
      throw DateMisalignmentError("benchmark date " + benchmark.dates[i].to_string() +
                                  " does not match the portfolio calendar");

  MetricsResult result = performance_metrics(daily_returns, rf_annual);

  double beta = kNaN;
  if (estimator == BetaEstimator::Kalman && daily_returns.size() >= 30) {
    const auto path = kalman::dynamic_beta(daily_returns, benchmark);
    beta = stats::mean(path.beta);
  } else {
    if (estimator == BetaEstimator::Kalman) result.flags.push_back("kalman_beta_fallback_ols");
    beta = ols_slope(benchmark.values, daily_returns.values);
    if (!std::isfinite(beta)) {
      result.flags.push_back("zero_variance_benchmark");
      beta = 0.0;
    }
  }
  result.values["beta"] = beta;
  result.values["specific_return"] =
      result.values["total_return"] - beta * compound(benchmark.values);
  return result;
}

// ---------------------------------------------------------------------------
// Backtest
// ---------------------------------------------------------------------------

namespace {

struct AlignedUniverse {
  std::vector<std::string> tickers;         // sorted
  std::vector<Date> dates;                  // intersection calendar
  std::vector<std::vector<double>> open;    // [ticker][day]
  std::vector<std::vector<double>> close;   // [ticker][day]
};

AlignedUniverse align_universe(const std::vector<BarSeries>& universe) {
  if (universe.empty()) throw EmptyUniverseError("backtest universe is empty");

  AlignedUniverse aligned;
  std::map<std::string, const BarSeries*> by_ticker;
  for (const auto& series : universe) {
    if (series.empty()) throw EmptySeriesError(series.ticker);
    if (!by_ticker.emplace(series.ticker, &series).second)
      throw DomainError("duplicate ticker in universe: " + series.ticker);
  }

  std::map<Date, std::size_t> date_votes;
  for (const auto& [ticker, series] : by_ticker)
    for (const auto& bar : series->bars) ++date_votes[bar.date];
  for (const auto& [date, votes] : date_votes)
    if (votes == by_ticker.size()) aligned.dates.push_back(date);
  if (aligned.dates.empty())
    throw CalendarMismatchError("universe calendars have no dates in common");

  for (const auto& [ticker, series] : by_ticker) {
    aligned.tickers.push_back(ticker);
    std::map<Date, const Bar*> bar_of;
    for (const auto& bar : series->bars) bar_of[bar.date] = &bar;
    std::vector<double> open, close;
    for (const auto& date : aligned.dates) {
      const Bar* bar = bar_of.at(date);
      if (!(bar->open > 0.0) || !(bar->close > 0.0) || !std::isfinite(bar->open) ||
          !std::isfinite(bar->close))
        throw NonPositivePriceError("bad open/close for " + ticker + " on " + date.to_string());
      open.push_back(bar->open);
      close.push_back(bar->close);
    }
    aligned.open.push_back(std::move(open));
    aligned.close.push_back(std::move(close));
  }
  return aligned;
}

// Target book selection on one decision date. Empty when the date has too
// few ranked names.
struct Selection {
  std::vector<std::string> longs;   // best factor first
  std::vector<std::string> shorts;  // worst factor first
  bool usable = false;
};

Selection select_books(const FactorPanel& factor, Eigen::Index row,
                       const std::set<std::string>& tradeable) {
  Selection selection;
  std::vector<RankedName> ranked;
  for (Eigen::Index j = 0; j < factor.values.cols(); ++j) {
    if (!std::isfinite(factor.values(row, j))) continue;
    if (tradeable.count(factor.tickers[static_cast<std::size_t>(j)]) == 0) continue;
    ranked.push_back({factor.values(row, j), static_cast<std::size_t>(j)});
  }
  const int q = factor.quantile_count;
  if (ranked.size() < static_cast<std::size_t>(q) || ranked.empty()) return selection;

  std::sort(ranked.begin(), ranked.end(), [](const RankedName& a, const RankedName& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.column < b.column;
  });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const int bucket = bucket_of(i, ranked.size(), q);
    const auto& ticker = factor.tickers[ranked[i].column];
    if (bucket == 0) selection.shorts.push_back(ticker);          // worst first
    if (bucket == q - 1) selection.longs.push_back(ticker);
  }
  std::reverse(selection.longs.begin(), selection.longs.end());   // best first
  selection.usable = true;
  return selection;
}

}  // namespace

BacktestReport run_backtest(const std::vector<BarSeries>& universe, const FactorPanel& factor,
                            const sizing::SizingPolicy& policy, const BacktestConfig& config) {
  sizing::validate_policy(policy);
  risk::validate(config.var);
  if (!(config.capital > 0.0) || !std::isfinite(config.capital))
    throw DomainError("initial capital must be positive and finite");
  if (config.commission_bps < 0.0) throw DomainError("commission must be nonnegative");
  if (config.min_variance_window < 2 || config.vol_window < 2)
    throw DomainError("rolling windows must cover at least 2 observations");

  const AlignedUniverse aligned = align_universe(universe);
  const std::size_t n = aligned.dates.size();
  if (n < 10)
    throw InsufficientHistoryError("backtest needs at least 10 aligned days, got " +
                                   std::to_string(n));

  std::set<std::string> tradeable(aligned.tickers.begin(), aligned.tickers.end());
  {
    bool any = false;
    for (const auto& ticker : factor.tickers) any = any || tradeable.count(ticker) > 0;
    if (!any) throw EmptyUniverseError("factor panel covers no universe ticker");
  }
  std::map<Date, Eigen::Index> factor_row;
  for (std::size_t i = 0; i < factor.rows(); ++i)
    factor_row[factor.dates[i]] = static_cast<Eigen::Index>(i);
  std::unordered_map<std::string, std::size_t> ticker_index;
  for (std::size_t i = 0; i < aligned.tickers.size(); ++i)
    ticker_index[aligned.tickers[i]] = i;

  BacktestReport report;
  report.initial_capital = config.capital;
  report.dates = aligned.dates;

  const int stride = stride_of(config.rebalance);
  const bool wants_trades = policy.long_pct > 0.0 || policy.short_pct > 0.0;

  double cash = config.capital;
  std::map<std::string, double> positions;  // ticker -> signed shares
  double peak = config.capital;
  bool skipped_thin_rebalance = false;
  bool min_variance_fallback = false;

  std::map<std::string, double> pending;  // weights decided yesterday
  bool has_pending = false;

  for (std::size_t t = 0; t < n; ++t) {
    double fees_today = 0.0;

    // Execute yesterday's decision at today's open, sizing with equity
    // marked at this open so a full-weight single-name book is a no-op.
    if (has_pending) {
      double equity_open = cash;
      for (const auto& [ticker, shares] : positions)
        equity_open += shares * aligned.open[ticker_index.at(ticker)][t];

      std::map<std::string, double> target_shares;
      for (const auto& [ticker, weight] : pending) {
        const double price = aligned.open[ticker_index.at(ticker)][t];
        target_shares[ticker] = weight * equity_open / price;
      }
      for (const auto& [ticker, shares] : positions)
        if (target_shares.find(ticker) == target_shares.end()) target_shares[ticker] = 0.0;

      for (const auto& [ticker, target] : target_shares) {
        const double current = positions.count(ticker) ? positions[ticker] : 0.0;
        const double delta = target - current;
        if (delta == 0.0) continue;
        const double price = aligned.open[ticker_index.at(ticker)][t];
        cash -= delta * price;
        fees_today += std::abs(delta * price) * config.commission_bps / 1e4;
        if (target == 0.0)
          positions.erase(ticker);
        else
          positions[ticker] = target;
      }
      cash -= fees_today;
      pending.clear();
      has_pending = false;
    }

    // Mark at the close.
    double equity = cash;
    double long_value = 0.0, short_value = 0.0;
    for (const auto& [ticker, shares] : positions) {
      const double value = shares * aligned.close[ticker_index.at(ticker)][t];
      equity += value;
      if (value >= 0.0)
        long_value += value;
      else
        short_value += -value;
    }
    peak = std::max(peak, equity);

    report.equity.push_back(equity);
    report.commissions.push_back(fees_today);
    report.long_exposure.push_back(equity != 0.0 ? long_value / equity : kNaN);
    report.short_exposure.push_back(equity != 0.0 ? short_value / equity : kNaN);
    report.gross_exposure.push_back(equity != 0.0 ? (long_value + short_value) / equity : kNaN);
    report.net_exposure.push_back(equity != 0.0 ? (long_value - short_value) / equity : kNaN);

    PortfolioState state;
    state.date = aligned.dates[t];
    state.cash = cash;
    state.positions = positions;
    state.equity = equity;
    state.peak_equity = peak;
    report.states.push_back(std::move(state));

    // Decide at the close of a rebalance date; the order executes at the
    // next day's open, so the last date never decides.
    if (!wants_trades || t % static_cast<std::size_t>(stride) != 0 || t + 1 >= n) continue;
    const auto row_it = factor_row.find(aligned.dates[t]);
    if (row_it == factor_row.end()) {
      skipped_thin_rebalance = true;
      continue;
    }
    Selection selection = select_books(factor, row_it->second, tradeable);
    if (!selection.usable) {
      skipped_thin_rebalance = true;
      continue;
    }
    if (policy.long_pct == 0.0) selection.longs.clear();
    if (policy.short_pct == 0.0) selection.shorts.clear();

    const auto weights =
        sizing::target_positions(policy, selection.longs, selection.shorts, equity);
    std::map<std::string, double> target;
    for (std::size_t i = 0; i < weights.tickers.size(); ++i)
      target[weights.tickers[i]] = weights.weights[i];

    // Minimum-variance policies re-weight the long book from the trailing
    // covariance of daily close-to-close returns; the short book stays
    // equal-weighted. Short history or negative weights fall back to the
    // equal split so the books remain genuinely long.
    if (policy.kind == sizing::PolicyKind::MinVariance && selection.longs.size() >= 2) {
      const std::size_t window = std::min<std::size_t>(
          static_cast<std::size_t>(config.min_variance_window), t);
      if (window >= 30) {
        const auto k = static_cast<Eigen::Index>(selection.longs.size());
        Eigen::MatrixXd returns(static_cast<Eigen::Index>(window), k);
        for (Eigen::Index j = 0; j < k; ++j) {
          const auto& closes = aligned.close[ticker_index.at(selection.longs[static_cast<std::size_t>(j)])];
          for (std::size_t w = 0; w < window; ++w) {
            const std::size_t day = t - window + w;
            returns(static_cast<Eigen::Index>(w), j) = closes[day + 1] / closes[day] - 1.0;
          }
        }
        const Eigen::RowVectorXd means = returns.colwise().mean();
        const Eigen::MatrixXd centered = returns.rowwise() - means;
        const Eigen::MatrixXd cov =
            centered.transpose() * centered / static_cast<double>(window - 1);
        try {
          const auto mv = sizing::min_variance_weights(cov, selection.longs);
          const bool nonnegative =
              std::all_of(mv.weights.begin(), mv.weights.end(), [](double w) { return w >= 0.0; });
          if (nonnegative) {
            for (std::size_t i = 0; i < mv.tickers.size(); ++i)
              target[mv.tickers[i]] = mv.weights[i] * policy.long_pct;
          } else {
            min_variance_fallback = true;
          }
        } catch (const SingularCovarianceError&) {
          min_variance_fallback = true;
        }
      } else {
        min_variance_fallback = true;
      }
    }

    pending = std::move(target);
    has_pending = true;
  }

  if (skipped_thin_rebalance) report.flags.push_back("rebalance_skipped_insufficient_names");
  if (min_variance_fallback) report.flags.push_back("min_variance_fallback_equal_weight");

  // Portfolio return series from the close marks.
  report.daily_returns.ticker = "PORTFOLIO";
  report.daily_returns.kind = ReturnKind::Simple;
  for (std::size_t t = 1; t < n; ++t) {
    report.daily_returns.dates.push_back(aligned.dates[t]);
    report.daily_returns.values.push_back(report.equity[t] / report.equity[t - 1] - 1.0);
  }

  // Rolling annualized volatility, aligned with the return dates.
  const auto& r = report.daily_returns.values;
  report.rolling_vol.assign(r.size(), kNaN);
  const auto vol_window = static_cast<std::size_t>(config.vol_window);
  for (std::size_t j = vol_window; j <= r.size(); ++j) {
    const std::span<const double> window(r.data() + (j - vol_window), vol_window);
    report.rolling_vol[j - 1] = stats::stdev(window) * std::sqrt(kTradingDays);
  }

  // Benchmark for the specific-return decomposition: a named member of the
  // universe, or the equal-weight average of all names.
  ReturnSeries benchmark;
  benchmark.kind = ReturnKind::Simple;
  benchmark.dates = report.daily_returns.dates;
  if (!config.benchmark_ticker.empty()) {
    const auto it = ticker_index.find(config.benchmark_ticker);
    if (it == ticker_index.end())
      throw DomainError("benchmark ticker is not in the universe: " + config.benchmark_ticker);
    benchmark.ticker = config.benchmark_ticker;
    const auto& closes = aligned.close[it->second];
    for (std::size_t t = 1; t < n; ++t)
      benchmark.values.push_back(closes[t] / closes[t - 1] - 1.0);
  } else {
    benchmark.ticker = "UNIVERSE";
    for (std::size_t t = 1; t < n; ++t) {
      double sum = 0.0;
      for (const auto& closes : aligned.close) sum += closes[t] / closes[t - 1] - 1.0;
      benchmark.values.push_back(sum / static_cast<double>(aligned.close.size()));
    }
  }
  report.metrics = performance_metrics(report.daily_returns, benchmark, config.rf_annual,
                                       config.beta_estimator);

  // Rolling VaR, violations, and the coverage/independence tests. A history
  // shorter than the VaR window leaves this section empty but flagged.
  if (report.daily_returns.size() > static_cast<std::size_t>(config.var.window)) {
    report.var = risk::rolling_var(report.daily_returns, config.var);
    report.hits = risk::hit_sequence(report.daily_returns, report.var, config.var.side);

    const auto guarded = [&report](const char* label, auto&& callback) {
      try {
        report.test_results.push_back(callback());
      } catch (const Error&) {
        report.flags.push_back(std::string("vartest_unavailable_") + label);
      }
    };
    guarded("uc", [&] { return vartests::uc_test(report.hits); });
    guarded("portmanteau", [&] { return vartests::independence_portmanteau(report.hits); });
    guarded("markov", [&] { return vartests::markov_test(report.hits); });
    guarded("geometric", [&] { return vartests::geometric_var_test(report.hits, report.var); });

    // Worst rolling loss threshold as the books are scaled up or down.
    // Scaling every position by s scales each portfolio return by s, and
    // both the parametric and the empirical-quantile thresholds are
    // positively homogeneous, so the table is exact under rescaling.
    for (double size : config.size_grid) {
      ReturnSeries scaled = report.daily_returns;
      for (double& v : scaled.values) v *= size;
      const auto scaled_var = risk::rolling_var(scaled, config.var);
      double worst = -std::numeric_limits<double>::infinity();
      for (double v : scaled_var.var_values) worst = std::max(worst, -v);
      report.max_var_by_size.push_back({size, worst});
    }
  } else {
    report.flags.push_back("var_unavailable_insufficient_history");
  }

  return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_report_json(std::ostream& out, const BacktestReport& report) {
  nlohmann::ordered_json doc;
  doc["initial_capital"] = report.initial_capital;
  doc["final_equity"] = report.equity.empty() ? 0.0 : report.equity.back();
  doc["days"] = report.dates.size();
  if (!report.dates.empty()) {
    doc["start_date"] = report.dates.front().to_string();
    doc["end_date"] = report.dates.back().to_string();
  }
  doc["total_commission"] =
      std::accumulate(report.commissions.begin(), report.commissions.end(), 0.0);

  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.metrics.values) metrics[key] = value;
  doc["metrics"] = std::move(metrics);
  doc["metric_flags"] = report.metrics.flags;
  doc["flags"] = report.flags;

  doc["var"] = nlohmann::ordered_json::object();
  doc["var"]["alpha"] = report.var.config.alpha;
  doc["var"]["window"] = report.var.config.window;
  doc["var"]["method"] = risk::to_string(report.var.config.method);
  doc["var"]["observations"] = report.var.size();
  doc["var"]["violations"] = report.hits.count();
  doc["var"]["degenerate_window"] = report.var.degenerate_window;

  doc["max_var_by_size"] = nlohmann::ordered_json::array();
  for (const auto& entry : report.max_var_by_size)
    doc["max_var_by_size"].push_back({{"size_pct", entry.size_pct}, {"max_var", entry.max_var}});

  doc["tests"] = nlohmann::ordered_json::array();
  for (const auto& test : report.test_results) {
    nlohmann::ordered_json item;
    item["name"] = test.name;
    item["statistic"] = test.statistic;
    item["df"] = test.df;
    item["p_value"] = test.p_value;
    item["reject_5pct"] = test.reject_5pct;
    item["components"] = nlohmann::ordered_json::object();
    for (const auto& [key, value] : test.components) item["components"][key] = value;
    item["flags"] = test.flags;
    doc["tests"].push_back(std::move(item));
  }

  out << doc.dump(2) << '\n';
}

void write_equity_csv(std::ostream& out, const BacktestReport& report) {
  out << "date,equity\n";
  for (std::size_t t = 0; t < report.dates.size(); ++t)
    out << report.dates[t].to_string() << ',' << format_double(report.equity[t]) << '\n';
}

void write_exposures_csv(std::ostream& out, const BacktestReport& report) {
  out << "date,long,short,gross,net\n";
  for (std::size_t t = 0; t < report.dates.size(); ++t) {
    out << report.dates[t].to_string() << ',' << format_double(report.long_exposure[t]) << ','
        << format_double(report.short_exposure[t]) << ','
        << format_double(report.gross_exposure[t]) << ','
        << format_double(report.net_exposure[t]) << '\n';
  }
}

void write_rolling_vol_csv(std::ostream& out, const BacktestReport& report) {
  out << "date,volatility\n";
  for (std::size_t j = 0; j < report.rolling_vol.size(); ++j) {
    if (!std::isfinite(report.rolling_vol[j])) continue;  // warmup
    out << report.daily_returns.dates[j].to_string() << ','
        << format_double(report.rolling_vol[j]) << '\n';
  }
}

void write_return_quantiles_csv(std::ostream& out, const BacktestReport& report) {
  out << "frequency,quantile,value\n";
  const auto& r = report.daily_returns.values;
  const double levels[] = {0.05, 0.25, 0.5, 0.75, 0.95};

  const auto emit = [&](const char* label, const std::vector<double>& sample) {
    if (sample.size() < 2) return;
    for (double level : levels)
      out << label << ',' << format_double(level) << ','
          << format_double(stats::quantile_type7(sample, level)) << '\n';
  };

  emit("daily", r);
  for (const auto& [label, span_days] : {std::pair{"weekly", 5}, std::pair{"monthly", 21}}) {
    std::vector<double> blocks;
    const auto width = static_cast<std::size_t>(span_days);
    for (std::size_t start = 0; start + width <= r.size(); start += width)
      blocks.push_back(compound(std::span<const double>(r.data() + start, width)));
    emit(label, blocks);
  }
}

void write_ic_csv(std::ostream& out, const FactorAnalytics& analytics) {
  out << "horizon,date,ic\n";
  for (const auto& series : analytics.ic_series)
    for (std::size_t i = 0; i < series.values.size(); ++i)
      out << series.horizon << ',' << series.dates[i].to_string() << ','
          << format_double(series.values[i]) << '\n';
}

void write_quantile_stats_csv(std::ostream& out, const FactorAnalytics& analytics) {
  out << "horizon,quantile,mean,stdev,count\n";
  for (const auto& row : analytics.quantile_stats)
    out << row.horizon << ',' << row.quantile << ',' << format_double(row.mean_return) << ','
        << format_double(row.stdev_return) << ',' << row.count << '\n';
}

}  // namespace sizebench::engine
