#include "sizebench/bars.hpp"

#include <cmath>

namespace sizebench {

bool Bar::valid() const {
  const double prices[] = {open, high, low, close, adj_close};
  for (double p : prices) {
    if (!std::isfinite(p) || p <= 0.0) return false;
  }
  if (!std::isfinite(volume) || volume < 0.0) return false;
  if (low > high) return false;
  if (low > open || low > close) return false;
  if (high < open || high < close) return false;
  return true;
}

std::vector<Date> BarSeries::dates() const {
  std::vector<Date> out;
  out.reserve(bars.size());
  for (const Bar& b : bars) out.push_back(b.date);
  return out;
}

std::vector<double> BarSeries::closes() const {
  std::vector<double> out;
  out.reserve(bars.size());
  for (const Bar& b : bars) out.push_back(b.close);
  return out;
}

std::vector<double> BarSeries::adj_closes() const {
  std::vector<double> out;
  out.reserve(bars.size());
  for (const Bar& b : bars) out.push_back(b.adj_close);
  return out;
}

}  // namespace sizebench
