#ifndef CANSAVE_DATE_HPP
#define CANSAVE_DATE_HPP

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace cansave {

// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
// Arithmetic uses the standard civil-date day-count algorithms so results
// do not depend on any locale or timezone machinery.
class Date {
 public:
  Date() = default;
  static Date from_ymd(int year, int month, int day);
  static Date from_serial(std::int64_t days) { return Date(days); }

  // Parses strict ISO-8601 "YYYY-MM-DD". Throws ParseError; `field` names the
  // offending field in the message.
  static Date parse_iso(std::string_view text, std::string_view field = "date");

  std::int64_t serial() const { return serial_; }
  void to_ymd(int& year, int& month, int& day) const;
  std::string to_iso() const;

  int year() const;
  int month() const;   // 1..12
  int day() const;     // 1..31

  Date add_days(std::int64_t n) const { return Date(serial_ + n); }
  // Calendar-month shift; the day of month is clamped to the target month's
  // length (2020-01-31 plus one month is 2020-02-29).
  Date add_months(int n) const;

  friend std::int64_t operator-(Date a, Date b) { return a.serial_ - b.serial_; }
  auto operator<=>(const Date&) const = default;

 private:
  explicit Date(std::int64_t s) : serial_(s) {}
  std::int64_t serial_ = 0;
};

// Elapsed years between two dates as day count / 365.25.
double years_between(Date from, Date to);

}  // namespace cansave

#endif  // CANSAVE_DATE_HPP
