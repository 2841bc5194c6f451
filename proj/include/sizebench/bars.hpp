#pragma once

#include <string>
#include <vector>

#include "sizebench/dates.hpp"

namespace sizebench {

// One daily OHLCV record. Prices are strictly positive and satisfy
// low <= min(open, close) <= max(open, close) <= high.
struct Bar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;
  double volume = 0.0;

  bool valid() const;
};

// Per-ticker daily series with strictly increasing, unique dates.
struct BarSeries {
  std::string ticker;
  std::vector<Bar> bars;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }

  std::vector<Date> dates() const;
  std::vector<double> closes() const;
  std::vector<double> adj_closes() const;
};

enum class ReturnKind { Simple, Log };
enum class PriceField { Close, AdjClose };

struct ReturnSeries {
  std::string ticker;
  std::vector<Date> dates;
  std::vector<double> values;
  ReturnKind kind = ReturnKind::Simple;

  std::size_t size() const { return values.size(); }
};

// Per-date long/short signal, values restricted to {-1, 0, +1}.
struct SignalSeries {
  std::vector<Date> dates;
  std::vector<int> values;

  std::size_t size() const { return values.size(); }
};

}  // namespace sizebench
