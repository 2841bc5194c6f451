#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sizebench/bars.hpp"

namespace sizebench::market_data {

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

// Loads a daily OHLCV CSV. The header row must name date, open, high, low,
// close, adj_close and volume (case-insensitive, any order; "adj close" and
// "adjclose" are accepted). Rows are date-sorted; duplicated dates keep the
// last occurrence. Bar invariants are enforced per row.
BarSeries ingest_csv(const std::filesystem::path& path, const std::string& ticker);

// Writes a series in the same format ingest_csv reads, with full double
// precision so ingest(write(ingest(x))) reproduces x exactly.
void write_csv(const BarSeries& series, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Returns and signals
// ---------------------------------------------------------------------------

// values[i] = P_i / P_{i-1} - 1 (simple) or ln(P_i / P_{i-1}) (log); the
// first date is dropped.
ReturnSeries compute_returns(const BarSeries& series, ReturnKind kind,
                             PriceField field = PriceField::Close);

// Per bar: +1 if low < close, -1 if low > close, 0 if equal. The -1 branch
// cannot occur on bars that satisfy the low <= close invariant; it is kept
// because the signal table defines it.
SignalSeries low_close_signal(const BarSeries& series);

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov screening
// ---------------------------------------------------------------------------

struct KsResult {
  std::string ticker;
  int window = 0;
  double statistic = 0.0;
  double p_value = 0.0;
};

// Filters returns to the momentum-consistent subsample (see below), pools
// them, standardizes by the pooled mean/stdev, and tests the result against
// the standard normal with the one-sample KS statistic.
//
// Filter rule: within each trailing window of `window` days ending at t,
// the return at t is retained when sum(signal) over the window is positive
// and signal_t == +1, or when the sum is negative and signal_t == -1.
KsResult ks_screen(const ReturnSeries& returns, const SignalSeries& signal, int window);

void write_ks_csv(const std::vector<KsResult>& results, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct RegimeSegment {
  int days = 0;
  double drift = 0.0;  // per-day log drift
  double vol = 0.0;    // per-day log volatility
};

struct RegimeSpec {
  std::string ticker = "SYN";
  double start_price = 100.0;
  Date start_date = Date::from_ymd(2015, 1, 2);
  std::vector<RegimeSegment> segments;
  double volume_base = 1.0e6;
  double volume_sigma = 0.3;
};

// Geometric-Brownian close path segmented by regime, weekday calendar,
// OHLC synthesized around the close, log-normal volume. Identical
// (spec, seed) pairs produce bit-identical series.
BarSeries generate_synthetic(const RegimeSpec& spec, std::uint64_t seed);

}  // namespace sizebench::market_data
