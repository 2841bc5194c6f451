#include "sizebench/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sizebench/errors.hpp"

namespace sizebench::indicators {

namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

// Windowed values are recomputed per window instead of maintained as a
// running sum. The O(n*w) cost is irrelevant at daily scale and it keeps
// every output value a pure function of its own window, so appending bars
// can never perturb earlier entries through accumulated rounding.
double window_mean(const std::vector<double>& x, std::size_t end_inclusive, int window) {
  double sum = 0.0;
  for (std::size_t i = end_inclusive + 1 - static_cast<std::size_t>(window); i <= end_inclusive;
       ++i) {
    sum += x[i];
  }
  return sum / static_cast<double>(window);
}

void check_window(int window, std::size_t length, const char* op) {
  if (window < 1) throw DomainError(std::string(op) + ": window must be >= 1");
  if (static_cast<std::size_t>(window) > length) {
    throw WindowTooLargeError(std::string(op) + ": window " + std::to_string(window) +
                              " exceeds series length " + std::to_string(length));
  }
}

void check_aligned(const std::vector<Date>& dates, const std::vector<double>& prices,
                   const char* op) {
  if (dates.size() != prices.size()) {
    throw DateMisalignmentError(std::string(op) + ": " + std::to_string(dates.size()) +
                                " dates vs " + std::to_string(prices.size()) + " prices");
  }
}

IndicatorSeries make_series(std::string name, std::map<std::string, double> params,
                            std::vector<Date> dates, int warmup) {
  IndicatorSeries s;
  s.name = std::move(name);
  s.params = std::move(params);
  s.dates = std::move(dates);
  s.warmup = warmup;
  return s;
}

std::vector<double> undefined_series(std::size_t n) {
  return std::vector<double>(n, kUndefined);
}

}  // namespace

const std::vector<double>& IndicatorSeries::channel(const std::string& channel_name) const {
  for (const auto& [name_, values] : channels) {
    if (name_ == channel_name) return values;
  }
  throw UnknownKindError("indicator '" + name + "' has no channel '" + channel_name + "'");
}

// ---------------------------------------------------------------------------
// Price-sequence transforms
// ---------------------------------------------------------------------------

IndicatorSeries sma(const std::vector<Date>& dates, const std::vector<double>& prices,
                    int window) {
  check_aligned(dates, prices, "sma");
  check_window(window, prices.size(), "sma");
  IndicatorSeries out =
      make_series("sma", {{"window", static_cast<double>(window)}}, dates, window - 1);
  std::vector<double> values = undefined_series(prices.size());
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < prices.size(); ++t) {
    values[t] = window_mean(prices, t, window);
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries ema(const std::vector<Date>& dates, const std::vector<double>& prices,
                    int window) {
  check_aligned(dates, prices, "ema");
  check_window(window, prices.size(), "ema");
  IndicatorSeries out =
      make_series("ema", {{"window", static_cast<double>(window)}}, dates, window - 1);
  std::vector<double> values = undefined_series(prices.size());
  const double k = 2.0 / (static_cast<double>(window) + 1.0);
  double level = window_mean(prices, static_cast<std::size_t>(window) - 1, window);
  values[window - 1] = level;
  for (std::size_t t = static_cast<std::size_t>(window); t < prices.size(); ++t) {
    level = k * prices[t] + (1.0 - k) * level;
    values[t] = level;
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries rsi(const std::vector<Date>& dates, const std::vector<double>& prices,
                    int window) {
  check_aligned(dates, prices, "rsi");
  if (window < 1) throw DomainError("rsi: window must be >= 1");
  if (prices.size() < static_cast<std::size_t>(window) + 1) {
    throw InsufficientDataError("rsi: need window+1 = " + std::to_string(window + 1) +
                                " prices, got " + std::to_string(prices.size()));
  }
  IndicatorSeries out =
      make_series("rsi", {{"window", static_cast<double>(window)}}, dates, window);
  std::vector<double> values = undefined_series(prices.size());

  std::vector<double> up(prices.size(), 0.0), down(prices.size(), 0.0);
  for (std::size_t t = 1; t < prices.size(); ++t) {
    up[t] = std::max(prices[t] - prices[t - 1], 0.0);
    down[t] = std::max(prices[t - 1] - prices[t], 0.0);
  }
  for (std::size_t t = static_cast<std::size_t>(window); t < prices.size(); ++t) {
    const double mean_up = window_mean(up, t, window);
    const double mean_down = window_mean(down, t, window);
    const double total = mean_up + mean_down;
    // A window with no movement has no momentum either way; read it as
    // neutral instead of dividing zero by zero.
    values[t] = total == 0.0 ? 50.0 : 100.0 * mean_up / total;
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries bollinger(const std::vector<Date>& dates, const std::vector<double>& prices,
                          int window, double k) {
  check_aligned(dates, prices, "bollinger");
  if (window < 2) throw DomainError("bollinger: window must be >= 2");
  if (k <= 0.0) throw DomainError("bollinger: band width k must be positive");
  check_window(window, prices.size(), "bollinger");
  IndicatorSeries out = make_series(
      "bollinger", {{"window", static_cast<double>(window)}, {"k", k}}, dates, window - 1);
  const std::size_t n = prices.size();
  std::vector<double> upper = undefined_series(n);
  std::vector<double> mid = undefined_series(n);
  std::vector<double> lower = undefined_series(n);
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < n; ++t) {
    const double m = window_mean(prices, t, window);
    double ss = 0.0;
    for (std::size_t i = t + 1 - static_cast<std::size_t>(window); i <= t; ++i) {
      const double d = prices[i] - m;
      ss += d * d;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(window));
    mid[t] = m;
    upper[t] = m + k * sigma;
    lower[t] = m - k * sigma;
  }
  out.channels.emplace_back("upper", std::move(upper));
  out.channels.emplace_back("mid", std::move(mid));
  out.channels.emplace_back("lower", std::move(lower));
  return out;
}

// ---------------------------------------------------------------------------
// Bar transforms
// ---------------------------------------------------------------------------

IndicatorSeries stochastic_k(const BarSeries& series, int window) {
  if (window < 1) throw DomainError("stochastic_k: window must be >= 1");
  if (series.size() < static_cast<std::size_t>(window)) {
    throw InsufficientDataError("stochastic_k: need " + std::to_string(window) + " bars, got " +
                                std::to_string(series.size()));
  }
  IndicatorSeries out = make_series("stochastic_k", {{"window", static_cast<double>(window)}},
                                    series.dates(), window - 1);
  std::vector<double> values = undefined_series(series.size());
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < series.size(); ++t) {
    double highest = series.bars[t].high;
    double lowest = series.bars[t].low;
    for (std::size_t i = t + 1 - static_cast<std::size_t>(window); i <= t; ++i) {
      highest = std::max(highest, series.bars[i].high);
      lowest = std::min(lowest, series.bars[i].low);
    }
    const double range = highest - lowest;
    values[t] = range == 0.0 ? 50.0 : 100.0 * (series.bars[t].close - lowest) / range;
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries mfi(const BarSeries& series, int window) {
  if (window < 1) throw DomainError("mfi: window must be >= 1");
  if (series.size() < static_cast<std::size_t>(window) + 1) {
    throw InsufficientDataError("mfi: need window+1 = " + std::to_string(window + 1) +
                                " bars, got " + std::to_string(series.size()));
  }
  IndicatorSeries out =
      make_series("mfi", {{"window", static_cast<double>(window)}}, series.dates(), window);
  const std::size_t n = series.size();
  std::vector<double> values = undefined_series(n);

  std::vector<double> typical(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const Bar& b = series.bars[t];
    typical[t] = (b.high + b.low + b.close) / 3.0;
  }
  // Signed raw flows; a flat typical price contributes to neither side.
  std::vector<double> positive(n, 0.0), negative(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    const double flow = typical[t] * series.bars[t].volume;
    if (typical[t] > typical[t - 1]) positive[t] = flow;
    if (typical[t] < typical[t - 1]) negative[t] = flow;
  }
  for (std::size_t t = static_cast<std::size_t>(window); t < n; ++t) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = t + 1 - static_cast<std::size_t>(window); i <= t; ++i) {
      pos += positive[i];
      neg += negative[i];
    }
    if (neg == 0.0) {
      values[t] = 100.0;
    } else {
      values[t] = 100.0 - 100.0 / (1.0 + pos / neg);
    }
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

// ---------------------------------------------------------------------------
// Dispatched bar indicators
// ---------------------------------------------------------------------------

namespace {

void require_bars(const BarSeries& series, std::size_t needed, const char* kind) {
  if (series.size() < needed) {
    throw InsufficientDataError(std::string(kind) + ": need " + std::to_string(needed) +
                                " bars, got " + std::to_string(series.size()));
  }
}

int int_param(const std::map<std::string, double>& params, const char* key) {
  const auto it = params.find(key);
  if (it == params.end()) throw MissingParamError(std::string("missing parameter '") + key + "'");
  return static_cast<int>(it->second);
}

double real_param(const std::map<std::string, double>& params, const char* key) {
  const auto it = params.find(key);
  if (it == params.end()) throw MissingParamError(std::string("missing parameter '") + key + "'");
  return it->second;
}

IndicatorSeries aroon(const BarSeries& series, const std::map<std::string, double>& params) {
  const int window = int_param(params, "window");
  if (window < 1) throw DomainError("aroon: window must be >= 1");
  require_bars(series, static_cast<std::size_t>(window) + 1, "aroon");
  IndicatorSeries out = make_series("aroon", params, series.dates(), window);
  const std::size_t n = series.size();
  std::vector<double> up_ch = undefined_series(n);
  std::vector<double> down_ch = undefined_series(n);
  std::vector<double> osc = undefined_series(n);
  for (std::size_t t = static_cast<std::size_t>(window); t < n; ++t) {
    // Look back over window+1 bars; ties resolve to the most recent bar.
    std::size_t hi_idx = t, lo_idx = t;
    for (std::size_t i = t - static_cast<std::size_t>(window); i <= t; ++i) {
      if (series.bars[i].high >= series.bars[hi_idx].high) hi_idx = i;
      if (series.bars[i].low <= series.bars[lo_idx].low) lo_idx = i;
    }
    const double up = 100.0 * (window - static_cast<double>(t - hi_idx)) / window;
    const double down = 100.0 * (window - static_cast<double>(t - lo_idx)) / window;
    up_ch[t] = up;
    down_ch[t] = down;
    osc[t] = up - down;
  }
  out.channels.emplace_back("up", std::move(up_ch));
  out.channels.emplace_back("down", std::move(down_ch));
  out.channels.emplace_back("oscillator", std::move(osc));
  return out;
}

IndicatorSeries pvt(const BarSeries& series, const std::map<std::string, double>& params) {
  require_bars(series, 2, "pvt");
  IndicatorSeries out = make_series("pvt", params, series.dates(), 1);
  std::vector<double> values = undefined_series(series.size());
  double running = 0.0;
  for (std::size_t t = 1; t < series.size(); ++t) {
    const double prev = series.bars[t - 1].close;
    running += series.bars[t].volume * (series.bars[t].close - prev) / prev;
    values[t] = running;
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries cmf(const BarSeries& series, const std::map<std::string, double>& params) {
  const int window = int_param(params, "window");
  if (window < 1) throw DomainError("cmf: window must be >= 1");
  require_bars(series, static_cast<std::size_t>(window), "cmf");
  IndicatorSeries out = make_series("cmf", params, series.dates(), window - 1);
  const std::size_t n = series.size();
  std::vector<double> flow(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const Bar& b = series.bars[t];
    const double range = b.high - b.low;
    const double mult = range == 0.0 ? 0.0 : ((b.close - b.low) - (b.high - b.close)) / range;
    flow[t] = mult * b.volume;
  }
  std::vector<double> values = undefined_series(n);
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < n; ++t) {
    double flow_sum = 0.0, vol_sum = 0.0;
    for (std::size_t i = t + 1 - static_cast<std::size_t>(window); i <= t; ++i) {
      flow_sum += flow[i];
      vol_sum += series.bars[i].volume;
    }
    values[t] = vol_sum == 0.0 ? 0.0 : flow_sum / vol_sum;
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries parabolic_sar(const BarSeries& series,
                              const std::map<std::string, double>& params) {
  const double af_start = real_param(params, "af_start");
  const double af_step = real_param(params, "af_step");
  const double af_max = real_param(params, "af_max");
  if (af_start <= 0.0 || af_step <= 0.0 || af_max < af_start) {
    throw DomainError("parabolic_sar: acceleration factors must satisfy 0 < start <= max");
  }
  require_bars(series, 2, "parabolic_sar");
  IndicatorSeries out = make_series("parabolic_sar", params, series.dates(), 1);
  const auto& bars = series.bars;
  const std::size_t n = bars.size();
  std::vector<double> values = undefined_series(n);

  bool rising = bars[1].close >= bars[0].close;
  double extreme = rising ? std::max(bars[0].high, bars[1].high)
                          : std::min(bars[0].low, bars[1].low);
  double sar = rising ? std::min(bars[0].low, bars[1].low)
                      : std::max(bars[0].high, bars[1].high);
  double af = af_start;
  values[1] = sar;

  for (std::size_t t = 2; t < n; ++t) {
    sar += af * (extreme - sar);
    if (rising) {
      // The stop may never move above the two most recent lows.
      sar = std::min({sar, bars[t - 1].low, bars[t - 2].low});
      if (bars[t].low < sar) {
        rising = false;
        sar = extreme;
        extreme = bars[t].low;
        af = af_start;
      } else if (bars[t].high > extreme) {
        extreme = bars[t].high;
        af = std::min(af + af_step, af_max);
      }
    } else {
      sar = std::max({sar, bars[t - 1].high, bars[t - 2].high});
      if (bars[t].high > sar) {
        rising = true;
        sar = extreme;
        extreme = bars[t].high;
        af = af_start;
      } else if (bars[t].low < extreme) {
        extreme = bars[t].low;
        af = std::min(af + af_step, af_max);
      }
    }
    values[t] = sar;
  }
  out.channels.emplace_back("value", std::move(values));
  return out;
}

IndicatorSeries keltner(const BarSeries& series, const std::map<std::string, double>& params) {
  const int ema_window = int_param(params, "ema_window");
  const int atr_window = int_param(params, "atr_window");
  const double mult = real_param(params, "mult");
  if (ema_window < 1 || atr_window < 1) throw DomainError("keltner: windows must be >= 1");
  if (mult <= 0.0) throw DomainError("keltner: mult must be positive");
  const std::size_t needed = static_cast<std::size_t>(std::max(ema_window, atr_window));
  require_bars(series, needed, "keltner");

  const std::size_t n = series.size();
  const int warmup = std::max(ema_window, atr_window) - 1;
  IndicatorSeries out = make_series("keltner", params, series.dates(), warmup);

  const IndicatorSeries ema_mid = ema(series.dates(), series.closes(), ema_window);
  const std::vector<double>& mid_raw = ema_mid.channel("value");

  // True range uses the prior close where one exists; the first bar falls
  // back to its own high-low range.
  std::vector<double> tr(n, 0.0);
  tr[0] = series.bars[0].high - series.bars[0].low;
  for (std::size_t t = 1; t < n; ++t) {
    const Bar& b = series.bars[t];
    const double prev_close = series.bars[t - 1].close;
    tr[t] = std::max({b.high - b.low, std::fabs(b.high - prev_close),
                      std::fabs(b.low - prev_close)});
  }

  std::vector<double> upper = undefined_series(n);
  std::vector<double> mid = undefined_series(n);
  std::vector<double> lower = undefined_series(n);
  for (std::size_t t = static_cast<std::size_t>(warmup); t < n; ++t) {
    const double atr = window_mean(tr, t, atr_window);
    mid[t] = mid_raw[t];
    upper[t] = mid[t] + mult * atr;
    lower[t] = mid[t] - mult * atr;
  }
  out.channels.emplace_back("upper", std::move(upper));
  out.channels.emplace_back("mid", std::move(mid));
  out.channels.emplace_back("lower", std::move(lower));
  return out;
}

double channel_midpoint(const BarSeries& series, std::size_t end_inclusive, int window) {
  double highest = series.bars[end_inclusive].high;
  double lowest = series.bars[end_inclusive].low;
  for (std::size_t i = end_inclusive + 1 - static_cast<std::size_t>(window); i <= end_inclusive;
       ++i) {
    highest = std::max(highest, series.bars[i].high);
    lowest = std::min(lowest, series.bars[i].low);
  }
  return (highest + lowest) / 2.0;
}

IndicatorSeries ichimoku(const BarSeries& series, const std::map<std::string, double>& params) {
  const int tenkan_w = int_param(params, "tenkan");
  const int kijun_w = int_param(params, "kijun");
  const int senkou_b_w = int_param(params, "senkou_b");
  if (tenkan_w < 1 || kijun_w < 1 || senkou_b_w < 1) {
    throw DomainError("ichimoku: windows must be >= 1");
  }
  const int longest = std::max({tenkan_w, kijun_w, senkou_b_w});
  require_bars(series, static_cast<std::size_t>(longest), "ichimoku");

  // All five lines are emitted unshifted at the bar that produced them.
  // The conventional plot displaces the cloud forward and the lagging line
  // backward, which is presentation-only and would inject look-ahead if
  // consumed as data, so the displacement is deliberately omitted.
  const std::size_t n = series.size();
  const int warmup = longest - 1;
  IndicatorSeries out = make_series("ichimoku", params, series.dates(), warmup);
  std::vector<double> tenkan = undefined_series(n);
  std::vector<double> kijun = undefined_series(n);
  std::vector<double> senkou_a = undefined_series(n);
  std::vector<double> senkou_b = undefined_series(n);
  std::vector<double> chikou = undefined_series(n);
  for (std::size_t t = static_cast<std::size_t>(warmup); t < n; ++t) {
    tenkan[t] = channel_midpoint(series, t, tenkan_w);
    kijun[t] = channel_midpoint(series, t, kijun_w);
    senkou_a[t] = (tenkan[t] + kijun[t]) / 2.0;
    senkou_b[t] = channel_midpoint(series, t, senkou_b_w);
    chikou[t] = series.bars[t].close;
  }
  out.channels.emplace_back("tenkan", std::move(tenkan));
  out.channels.emplace_back("kijun", std::move(kijun));
  out.channels.emplace_back("senkou_a", std::move(senkou_a));
  out.channels.emplace_back("senkou_b", std::move(senkou_b));
  out.channels.emplace_back("chikou", std::move(chikou));
  return out;
}

IndicatorSeries acceleration_bands(const BarSeries& series,
                                   const std::map<std::string, double>& params) {
  const int window = int_param(params, "window");
  if (window < 1) throw DomainError("acceleration_bands: window must be >= 1");
  require_bars(series, static_cast<std::size_t>(window), "acceleration_bands");
  IndicatorSeries out = make_series("acceleration_bands", params, series.dates(), window - 1);
  const std::size_t n = series.size();

  std::vector<double> upper_raw(n, 0.0), lower_raw(n, 0.0), closes(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const Bar& b = series.bars[t];
    const double factor = 4.0 * (b.high - b.low) / (b.high + b.low);
    upper_raw[t] = b.high * (1.0 + factor);
    lower_raw[t] = b.low * (1.0 - factor);
    closes[t] = b.close;
  }
  std::vector<double> upper = undefined_series(n);
  std::vector<double> mid = undefined_series(n);
  std::vector<double> lower = undefined_series(n);
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < n; ++t) {
    upper[t] = window_mean(upper_raw, t, window);
    mid[t] = window_mean(closes, t, window);
    lower[t] = window_mean(lower_raw, t, window);
  }
  out.channels.emplace_back("upper", std::move(upper));
  out.channels.emplace_back("mid", std::move(mid));
  out.channels.emplace_back("lower", std::move(lower));
  return out;
}

}  // namespace

std::map<std::string, double> default_params(const std::string& kind) {
  if (kind == "sma" || kind == "ema") return {{"window", 20.0}};
  if (kind == "rsi") return {{"window", 14.0}};
  if (kind == "bollinger") return {{"window", 20.0}, {"k", 2.0}};
  if (kind == "stochastic_k") return {{"window", 4.0}};
  if (kind == "mfi") return {{"window", 14.0}};
  if (kind == "aroon") return {{"window", 25.0}};
  if (kind == "pvt") return {};
  if (kind == "cmf") return {{"window", 21.0}};
  if (kind == "parabolic_sar") return {{"af_start", 0.02}, {"af_step", 0.02}, {"af_max", 0.2}};
  if (kind == "keltner") return {{"ema_window", 20.0}, {"atr_window", 10.0}, {"mult", 2.0}};
  if (kind == "ichimoku") return {{"tenkan", 9.0}, {"kijun", 26.0}, {"senkou_b", 52.0}};
  if (kind == "acceleration_bands") return {{"window", 20.0}};
  throw UnknownKindError("no indicator kind '" + kind + "'");
}

const std::vector<std::string>& dispatch_kinds() {
  static const std::vector<std::string> kinds = {
      "aroon", "pvt", "cmf", "parabolic_sar", "keltner", "ichimoku", "acceleration_bands"};
  return kinds;
}

IndicatorSeries compute_indicator(const std::string& kind, const BarSeries& series,
                                  const std::map<std::string, double>& params) {
  std::map<std::string, double> merged = default_params(kind);
  for (const auto& [key, value] : params) {
    if (merged.find(key) == merged.end()) {
      throw DomainError("indicator '" + kind + "' has no parameter '" + key + "'");
    }
    merged[key] = value;
  }
  if (kind == "aroon") return aroon(series, merged);
  if (kind == "pvt") return pvt(series, merged);
  if (kind == "cmf") return cmf(series, merged);
  if (kind == "parabolic_sar") return parabolic_sar(series, merged);
  if (kind == "keltner") return keltner(series, merged);
  if (kind == "ichimoku") return ichimoku(series, merged);
  if (kind == "acceleration_bands") return acceleration_bands(series, merged);
  throw UnknownKindError("no indicator kind '" + kind + "'");
}

void write_indicator_csv(const IndicatorSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "date";
  for (const auto& [name, values] : series.channels) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < series.size(); ++t) {
    out << series.dates[t].to_string();
    for (const auto& [name, values] : series.channels) {
      out << ',';
      if (!std::isnan(values[t])) {
        std::snprintf(buf, sizeof(buf), "%.17g", values[t]);
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace sizebench::indicators
