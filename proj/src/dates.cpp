#include "sizebench/dates.hpp"

#include <charconv>
#include <stdexcept>

namespace sizebench {

namespace {

// Civil-calendar conversions via the standard days-from-civil algorithm.
std::int32_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int32_t>(doe) - 719468;
}

void civil_from_days(std::int32_t z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = yr + (m <= 2);
}

int parse_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

Date Date::from_ymd(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 || day > 31) {
    throw std::invalid_argument("invalid calendar date");
  }
  return Date(days_from_civil(year, month, day));
}

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(iso) + "'");
  }
  Date date = from_ymd(parse_int(iso.substr(0, 4)), parse_int(iso.substr(5, 2)),
                       parse_int(iso.substr(8, 2)));
  if (date.to_string() != iso) {
    throw std::invalid_argument("invalid calendar date '" + std::string(iso) + "'");
  }
  return date;
}

std::string Date::to_string() const {
  int y, m, d;
  civil_from_days(serial_, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

int Date::year() const {
  int y, m, d;
  civil_from_days(serial_, y, m, d);
  return y;
}

int Date::month() const {
  int y, m, d;
  civil_from_days(serial_, y, m, d);
  return m;
}

int Date::day() const {
  int y, m, d;
  civil_from_days(serial_, y, m, d);
  return d;
}

int Date::weekday() const {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  std::int32_t wd = (serial_ + 3) % 7;
  if (wd < 0) wd += 7;
  return static_cast<int>(wd);
}

Date Date::next_weekday() const {
  Date next = plus_days(1);
  while (next.is_weekend()) next = next.plus_days(1);
  return next;
}

}  // namespace sizebench
