#include "cansave/date.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "cansave/error.hpp"

namespace cansave {
namespace {

// Howard Hinnant's civil-from-days / days-from-civil algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

bool is_leap(int y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                  31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[static_cast<std::size_t>(m - 1)];
}

int parse_int_field(std::string_view s, std::string_view field) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("malformed " + std::string(field) + ": non-numeric component '" +
                     std::string(s) + "'");
  return value;
}

}  // namespace

Date Date::from_ymd(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month))
    throw ParseError("invalid calendar date " + std::to_string(year) + "-" +
                     std::to_string(month) + "-" + std::to_string(day));
  return Date(days_from_civil(year, month, day));
}

Date Date::parse_iso(std::string_view text, std::string_view field) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw ParseError("malformed " + std::string(field) + ": expected YYYY-MM-DD, got '" +
                     std::string(text) + "'");
  const int y = parse_int_field(text.substr(0, 4), field);
  const int m = parse_int_field(text.substr(5, 2), field);
  const int d = parse_int_field(text.substr(8, 2), field);
  if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m))
    throw ParseError("malformed " + std::string(field) + ": '" + std::string(text) +
                     "' is not a real calendar date");
  return Date(days_from_civil(y, m, d));
}

void Date::to_ymd(int& year, int& month, int& day) const {
  civil_from_days(serial_, year, month, day);
}

std::string Date::to_iso() const {
  int y, m, d;
  to_ymd(y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

int Date::year() const {
  int y, m, d;
  to_ymd(y, m, d);
  return y;
}

int Date::month() const {
  int y, m, d;
  to_ymd(y, m, d);
  return m;
}

int Date::day() const {
  int y, m, d;
  to_ymd(y, m, d);
  return d;
}

Date Date::add_months(int n) const {
  int y, m, d;
  to_ymd(y, m, d);
  const int total = y * 12 + (m - 1) + n;
  const int ny = total >= 0 ? total / 12 : (total - 11) / 12;
  const int nm = total - ny * 12 + 1;
  const int nd = std::min(d, days_in_month(ny, nm));
  return Date(days_from_civil(ny, nm, nd));
}

double years_between(Date from, Date to) {
  return static_cast<double>(to - from) / 365.25;
}

}  // namespace cansave
