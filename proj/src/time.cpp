#include "fxgp/time.hpp"

#include <chrono>
#include <cstdio>

#include "fxgp/error.hpp"

namespace fxgp {

namespace {

using namespace std::chrono;

constexpr Timestamp kDay = 86400;

Timestamp floor_div(Timestamp a, Timestamp b) {
  Timestamp q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int read_digits(std::string_view text, std::size_t pos, std::size_t count) {
  if (pos + count > text.size()) {
    throw DataError("timestamp '" + std::string(text) + "' is truncated");
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw DataError("timestamp '" + std::string(text) + "' has a non-digit at offset " +
                      std::to_string(i));
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw DataError("timestamp '" + std::string(text) + "': expected '" + std::string(1, c) +
                    "' at offset " + std::to_string(pos));
  }
}

Timestamp utc_seconds(year_month_day ymd, int hh, int mm, int ss) {
  return static_cast<Timestamp>(sys_days(ymd).time_since_epoch().count()) * kDay + hh * 3600 +
         mm * 60 + ss;
}

}  // namespace

Timestamp parse_rfc3339(std::string_view text) {
  const int y = read_digits(text, 0, 4);
  expect(text, 4, '-');
  const int mo = read_digits(text, 5, 2);
  expect(text, 7, '-');
  const int d = read_digits(text, 8, 2);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError("timestamp '" + std::string(text) + "' is not a calendar date");
  if (text.size() == 10) return utc_seconds(ymd, 0, 0, 0);

  if (text[10] != 'T' && text[10] != 't' && text[10] != ' ') expect(text, 10, 'T');
  const int hh = read_digits(text, 11, 2);
  expect(text, 13, ':');
  const int mi = read_digits(text, 14, 2);
  expect(text, 16, ':');
  const int ss = read_digits(text, 17, 2);
  if (hh > 23 || mi > 59 || ss > 59) {
    throw DataError("timestamp '" + std::string(text) + "' has an out-of-range time");
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    // fractional seconds must be zero: bars live on a whole-second grid
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (text[pos] != '0') {
        throw DataError("timestamp '" + std::string(text) + "' has non-zero fractional seconds");
      }
      ++pos;
    }
  }
  Timestamp offset = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '-' ? -1 : 1;
    const int oh = read_digits(text, pos + 1, 2);
    expect(text, pos + 3, ':');
    const int om = read_digits(text, pos + 4, 2);
    offset = sign * (oh * 3600 + om * 60);
    pos += 6;
  } else {
    throw DataError("timestamp '" + std::string(text) + "' lacks a UTC offset");
  }
  if (pos != text.size()) {
    throw DataError("timestamp '" + std::string(text) + "' has trailing characters");
  }
  return utc_seconds(ymd, hh, mi, ss) - offset;
}

std::string format_rfc3339(Timestamp ts) {
  const Timestamp days = floor_div(ts, kDay);
  const Timestamp secs = ts - days * kDay;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs % 3600 / 60),
                static_cast<int>(secs % 60));
  return buf;
}

std::int32_t us_eastern_offset(Timestamp ts) {
  const Timestamp days = floor_div(ts, kDay);
  const year y = year_month_day{sys_days{std::chrono::days{days}}}.year();
  // DST runs from 2:00 EST on the second Sunday of March (07:00 UTC) to
  // 2:00 EDT on the first Sunday of November (06:00 UTC).
  const sys_days dst_start{y / March / Sunday[2]};
  const sys_days dst_end{y / November / Sunday[1]};
  const Timestamp start = dst_start.time_since_epoch().count() * kDay + 7 * 3600;
  const Timestamp end = dst_end.time_since_epoch().count() * kDay + 6 * 3600;
  return (ts >= start && ts < end) ? -4 * 3600 : -5 * 3600;
}

TradingDay trading_day(Timestamp bar_close) {
  const Timestamp local = bar_close + us_eastern_offset(bar_close);
  return static_cast<TradingDay>(floor_div(local + 7 * 3600 - 1, kDay));
}

bool in_trading_week(Timestamp bar_close) {
  const weekday wd{sys_days{std::chrono::days{trading_day(bar_close)}}};
  return wd != Saturday && wd != Sunday;
}

std::string format_day(TradingDay day) {
  const year_month_day ymd{sys_days{std::chrono::days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace fxgp
