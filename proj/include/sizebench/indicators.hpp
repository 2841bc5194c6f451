#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sizebench/bars.hpp"

namespace sizebench::indicators {

// Windowed transform output. Entries before `warmup` are undefined and
// stored as NaN; everything from `warmup` on is finite. Zero-filling the
// warmup region would leak fake values into downstream consumers, so the
// undefined prefix is kept explicit.
struct IndicatorSeries {
  std::string name;
  std::map<std::string, double> params;  // effective parameters, post-default
  std::vector<Date> dates;
  std::vector<std::pair<std::string, std::vector<double>>> channels;
  int warmup = 0;

  std::size_t size() const { return dates.size(); }
  bool defined(std::size_t t) const { return t >= static_cast<std::size_t>(warmup); }

  // Channel lookup by name; throws UnknownKindError when absent.
  const std::vector<double>& channel(const std::string& channel_name) const;
};

// ---------------------------------------------------------------------------
// Price-sequence transforms
// ---------------------------------------------------------------------------

IndicatorSeries sma(const std::vector<Date>& dates, const std::vector<double>& prices,
                    int window);

// Seeded with the SMA of the first `window` values, then
// value_t = k * P_t + (1 - k) * value_{t-1} with k = 2 / (window + 1).
IndicatorSeries ema(const std::vector<Date>& dates, const std::vector<double>& prices,
                    int window);

// Momentum oscillator on simple window means of up and down moves. A window
// with no movement at all reads 50.
IndicatorSeries rsi(const std::vector<Date>& dates, const std::vector<double>& prices,
                    int window);

// Bands at k population standard deviations around the SMA midline.
IndicatorSeries bollinger(const std::vector<Date>& dates, const std::vector<double>& prices,
                          int window, double k);

// ---------------------------------------------------------------------------
// Bar transforms
// ---------------------------------------------------------------------------

// Position of the close within the rolling high/low range, in [0, 100].
// A zero range reads 50.
IndicatorSeries stochastic_k(const BarSeries& series, int window = 4);

// Money flow index over typical-price flows, in [0, 100]. Flat typical
// prices contribute to neither side; zero negative flow reads 100.
IndicatorSeries mfi(const BarSeries& series, int window = 14);

// Remaining bar indicators, dispatched by kind:
//   aroon, pvt, cmf, parabolic_sar, keltner, ichimoku, acceleration_bands
// Parameters are merged over per-kind defaults (see default_params);
// unknown parameter names are rejected.
IndicatorSeries compute_indicator(const std::string& kind, const BarSeries& series,
                                  const std::map<std::string, double>& params = {});

// Default parameter map for every kind accepted by compute_indicator, plus
// the sma/ema/rsi/bollinger/stochastic_k/mfi front-ends.
std::map<std::string, double> default_params(const std::string& kind);

// All kinds accepted by compute_indicator, in emission order.
const std::vector<std::string>& dispatch_kinds();

// CSV with a date column plus one column per channel; undefined entries
// are emitted as empty fields.
void write_indicator_csv(const IndicatorSeries& series, const std::filesystem::path& path);

}  // namespace sizebench::indicators
