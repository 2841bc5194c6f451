#include "sizebench/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "sizebench/errors.hpp"
#include "sizebench/rng.hpp"
#include "sizebench/stats.hpp"

namespace sizebench::market_data {

namespace {

// Header tokens are matched after lowercasing and stripping separators, so
// "Adj Close", "adj_close" and "AdjClose" all map to the same column.
std::string normalize_token(const std::string& raw) {
  std::string out;
  for (char c : raw) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double_strict(const std::string& raw) {
  const std::string s = strip(raw);
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw std::invalid_argument("not a number: '" + raw + "'");
  }
  return value;
}

void format_full_precision(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

BarSeries ingest_csv(const std::filesystem::path& path, const std::string& ticker) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw EmptySeriesError("'" + path.string() + "' is empty");

  // Map required columns to positions from the header row. Extra columns
  // are ignored.
  std::unordered_map<std::string, std::size_t> positions;
  const std::vector<std::string> header = split_csv_line(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    positions.emplace(normalize_token(header[i]), i);
  }
  auto column = [&](const char* name) -> std::size_t {
    auto it = positions.find(name);
    if (it == positions.end()) {
      throw MissingColumnError("'" + path.string() + "' has no '" + std::string(name) +
                               "' column");
    }
    return it->second;
  };
  const std::size_t c_date = column("date");
  const std::size_t c_open = column("open");
  const std::size_t c_high = column("high");
  const std::size_t c_low = column("low");
  const std::size_t c_close = column("close");
  const std::size_t c_adj = column("adjclose");
  const std::size_t c_volume = column("volume");

  std::vector<Bar> bars;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (strip(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw MalformedRowError(line_number,
                              "expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    Bar bar;
    try {
      bar.date = Date::parse(strip(fields[c_date]));
      bar.open = parse_double_strict(fields[c_open]);
      bar.high = parse_double_strict(fields[c_high]);
      bar.low = parse_double_strict(fields[c_low]);
      bar.close = parse_double_strict(fields[c_close]);
      bar.adj_close = parse_double_strict(fields[c_adj]);
      bar.volume = parse_double_strict(fields[c_volume]);
    } catch (const MalformedRowError&) {
      throw;
    } catch (const std::exception& e) {
      throw MalformedRowError(line_number, e.what());
    }
    const double prices[] = {bar.open, bar.high, bar.low, bar.close, bar.adj_close};
    for (double p : prices) {
      if (std::isfinite(p) && p <= 0.0) {
        throw NonPositivePriceError("line " + std::to_string(line_number) + " of '" +
                                    path.string() + "' has a price <= 0");
      }
    }
    if (!bar.valid()) {
      throw MalformedRowError(line_number, "bar violates price ordering (low <= open/close <= high)");
    }
    bars.push_back(bar);
  }
  if (bars.empty()) throw EmptySeriesError("'" + path.string() + "' has no data rows");

  // Sort by date; for duplicated dates the later file row wins, which a
  // stable sort preserves as the last element of each equal-date run.
  std::stable_sort(bars.begin(), bars.end(),
                   [](const Bar& a, const Bar& b) { return a.date < b.date; });
  std::vector<Bar> unique;
  unique.reserve(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    if (i + 1 < bars.size() && bars[i + 1].date == bars[i].date) continue;
    unique.push_back(bars[i]);
  }

  BarSeries series;
  series.ticker = ticker;
  series.bars = std::move(unique);
  return series;
}

void write_csv(const BarSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "date,open,high,low,close,adj_close,volume\n";
  std::string row;
  for (const Bar& b : series.bars) {
    row.clear();
    row += b.date.to_string();
    for (double v : {b.open, b.high, b.low, b.close, b.adj_close, b.volume}) {
      row.push_back(',');
      format_full_precision(row, v);
    }
    row.push_back('\n');
    out << row;
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ReturnSeries compute_returns(const BarSeries& series, ReturnKind kind, PriceField field) {
  if (series.size() < 2) {
    throw SeriesTooShortError("need at least 2 bars to compute returns, got " +
                              std::to_string(series.size()));
  }
  ReturnSeries out;
  out.ticker = series.ticker;
  out.kind = kind;
  out.dates.reserve(series.size() - 1);
  out.values.reserve(series.size() - 1);
  auto price = [&](const Bar& b) {
    return field == PriceField::AdjClose ? b.adj_close : b.close;
  };
  for (std::size_t i = 1; i < series.bars.size(); ++i) {
    const double ratio = price(series.bars[i]) / price(series.bars[i - 1]);
    out.dates.push_back(series.bars[i].date);
    out.values.push_back(kind == ReturnKind::Log ? std::log(ratio) : ratio - 1.0);
  }
  return out;
}

SignalSeries low_close_signal(const BarSeries& series) {
  if (series.empty()) throw EmptySeriesError("cannot compute signal for an empty series");
  SignalSeries out;
  out.dates.reserve(series.size());
  out.values.reserve(series.size());
  for (const Bar& b : series.bars) {
    out.dates.push_back(b.date);
    if (b.low < b.close) {
      out.values.push_back(+1);
    } else if (b.low > b.close) {
      // Unreachable on bars satisfying low <= close; kept because the
      // signal table defines all three branches.
      out.values.push_back(-1);
    } else {
      out.values.push_back(0);
    }
  }
  return out;
}

KsResult ks_screen(const ReturnSeries& returns, const SignalSeries& signal, int window) {
  if (window <= 0) throw InsufficientDataError("window must be positive");
  const std::size_t n = returns.size();
  if (n < static_cast<std::size_t>(window) + 1) {
    throw InsufficientDataError("need at least window+1 returns for the screen, got " +
                                std::to_string(n));
  }

  // Align the signal to the return dates. The signal series usually covers
  // one extra leading date (returns drop the first bar).
  std::vector<int> sig(n, 0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (j < signal.dates.size() && signal.dates[j] < returns.dates[i]) ++j;
    if (j == signal.dates.size() || !(signal.dates[j] == returns.dates[i])) {
      throw DateMisalignmentError("signal has no value for " + returns.dates[i].to_string());
    }
    sig[i] = signal.values[j];
  }

  // Momentum-consistent subsample: keep the return at t when the trailing
  // window of signals agrees in direction with the signal at t.
  std::vector<double> retained;
  int rolling_sum = 0;
  for (int i = 0; i < window; ++i) rolling_sum += sig[i];
  for (std::size_t t = window - 1; t < n; ++t) {
    if ((rolling_sum > 0 && sig[t] == +1) || (rolling_sum < 0 && sig[t] == -1)) {
      retained.push_back(returns.values[t]);
    }
    if (t + 1 < n) rolling_sum += sig[t + 1] - sig[t + 1 - window];
  }
  if (retained.size() < 2) {
    throw InsufficientDataError("signal filter retained " + std::to_string(retained.size()) +
                                " returns; need at least 2");
  }

  const auto [lo, hi] = std::minmax_element(retained.begin(), retained.end());
  if (*lo == *hi) throw ZeroVarianceError("retained returns have zero variance");
  const double m = stats::mean(retained);
  const double s = stats::stdev(retained);
  for (double& r : retained) r = (r - m) / s;

  KsResult result;
  result.ticker = returns.ticker;
  result.window = window;
  result.statistic = stats::ks_statistic(retained, [](double x) { return stats::normal_cdf(x); });
  result.p_value = stats::kolmogorov_pvalue(result.statistic, retained.size());
  return result;
}

void write_ks_csv(const std::vector<KsResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "ticker,window,statistic,p_value\n";
  std::string row;
  for (const KsResult& r : results) {
    row.clear();
    row += r.ticker;
    row.push_back(',');
    row += std::to_string(r.window);
    row.push_back(',');
    format_full_precision(row, r.statistic);
    row.push_back(',');
    format_full_precision(row, r.p_value);
    row.push_back('\n');
    out << row;
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

BarSeries generate_synthetic(const RegimeSpec& spec, std::uint64_t seed) {
  if (spec.segments.empty()) throw InvalidRegimeError("regime spec has no segments");
  for (const RegimeSegment& seg : spec.segments) {
    if (seg.days <= 0) throw InvalidRegimeError("segment length must be positive");
    if (seg.vol < 0.0) throw InvalidRegimeError("segment volatility must be non-negative");
    if (!std::isfinite(seg.drift) || !std::isfinite(seg.vol)) {
      throw InvalidRegimeError("segment parameters must be finite");
    }
  }
  if (spec.start_price <= 0.0) throw InvalidRegimeError("start price must be positive");

  Rng rng = Rng::substream(seed, 0);
  BarSeries series;
  series.ticker = spec.ticker;

  Date date = spec.start_date.is_weekend() ? spec.start_date.next_weekday() : spec.start_date;
  double prev_close = spec.start_price;
  for (const RegimeSegment& seg : spec.segments) {
    for (int d = 0; d < seg.days; ++d) {
      const double z = rng.normal();
      const double close = prev_close * std::exp(seg.drift + seg.vol * z);

      // Half-normal shadows around the open/close range, scaled to half the
      // daily volatility. The low factor is clamped so prices stay positive.
      const double u = std::fabs(rng.normal()) * 0.5 * seg.vol;
      const double v = std::min(std::fabs(rng.normal()) * 0.5 * seg.vol, 0.9);

      Bar bar;
      bar.date = date;
      bar.open = prev_close;
      bar.close = close;
      bar.high = std::max(bar.open, bar.close) * (1.0 + u);
      bar.low = std::min(bar.open, bar.close) * (1.0 - v);
      bar.adj_close = close;
      bar.volume = std::round(spec.volume_base * std::exp(spec.volume_sigma * rng.normal()));

      series.bars.push_back(bar);
      prev_close = close;
      date = date.next_weekday();
    }
  }
  return series;
}

}  // namespace sizebench::market_data
