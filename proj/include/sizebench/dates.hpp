#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace sizebench {

// Calendar day stored as a serial count of days since 1970-01-01.
// Comparisons, sorting and day arithmetic operate on the serial value;
// no timezone or intraday component exists anywhere in the toolkit.
class Date {
 public:
  Date() = default;
  explicit Date(std::int32_t serial) : serial_(serial) {}

  static Date from_ymd(int year, int month, int day);

  // Parses strict ISO-8601 "YYYY-MM-DD". Throws std::invalid_argument so
  // callers can wrap the failure with their own context (file, line).
  static Date parse(std::string_view iso);

  std::string to_string() const;

  std::int32_t serial() const { return serial_; }
  int year() const;
  int month() const;
  int day() const;

  // 0 = Monday ... 6 = Sunday.
  int weekday() const;
  bool is_weekend() const { return weekday() >= 5; }

  Date plus_days(int n) const { return Date(serial_ + n); }
  Date next_weekday() const;

  auto operator<=>(const Date&) const = default;

 private:
  std::int32_t serial_ = 0;
};

}  // namespace sizebench
