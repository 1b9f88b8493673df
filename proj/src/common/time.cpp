#include "parkcast/common/time.hpp"

#include <cctype>
#include <cstdio>

#include "parkcast/common/error.hpp"

namespace parkcast {

namespace {

using namespace std::chrono;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool read_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = text[pos + i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

[[noreturn]] void bad(std::string_view text) {
  throw ArgumentError("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!read_digits(text, 0, 4, y) || text.size() < 19 || text[4] != '-' ||
      !read_digits(text, 5, 2, mo) || text[7] != '-' || !read_digits(text, 8, 2, d) ||
      (text[10] != 'T' && text[10] != ' ') || !read_digits(text, 11, 2, h) ||
      text[13] != ':' || !read_digits(text, 14, 2, mi) || text[16] != ':' ||
      !read_digits(text, 17, 2, s)) {
    bad(text);
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  std::int64_t offset_seconds = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) {
      pos += 1;
    } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size()) {
      int oh = 0, om = 0;
      if (!read_digits(text, pos + 1, 2, oh) || text[pos + 3] != ':' ||
          !read_digits(text, pos + 4, 2, om)) {
        bad(text);
      }
      offset_seconds = (oh * 3600 + om * 60) * (text[pos] == '+' ? 1 : -1);
      pos += 6;
    } else {
      bad(text);
    }
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) bad(text);
  const auto base = sys_days{ymd};
  return time_point_cast<seconds>(base) + hours{h} + minutes{mi} + seconds{s} -
         seconds{offset_seconds};
}

std::string format_iso8601(Timestamp t) {
  const std::int64_t epoch = to_epoch(t);
  const std::int64_t days = floor_div(epoch, kSecondsPerDay);
  const std::int64_t rem = epoch - days * kSecondsPerDay;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                static_cast<int>(rem % 60));
  return buf;
}

Timestamp floor_hour(Timestamp t) {
  return from_epoch(floor_div(to_epoch(t), kSecondsPerHour) * kSecondsPerHour);
}

Timestamp floor_day(Timestamp t) {
  return from_epoch(floor_div(to_epoch(t), kSecondsPerDay) * kSecondsPerDay);
}

int hour_of_day(Timestamp t) {
  const std::int64_t epoch = to_epoch(t);
  return static_cast<int>((epoch - floor_div(epoch, kSecondsPerDay) * kSecondsPerDay) /
                          kSecondsPerHour);
}

bool is_hour_aligned(Timestamp t) { return floor_hour(t) == t; }

int day_index(Timestamp from, Timestamp to) {
  return static_cast<int>(floor_div(to_epoch(to), kSecondsPerDay) -
                          floor_div(to_epoch(from), kSecondsPerDay));
}

}  // namespace parkcast
