#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace parkcast {

using Timestamp = std::chrono::sys_seconds;

constexpr std::int64_t kSecondsPerHour = 3600;
constexpr std::int64_t kSecondsPerDay = 86400;

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional fractional part (dropped) and
// an optional zone suffix: "Z", "+HH:MM" or "-HH:MM". No suffix means UTC.
// A space may replace the 'T'. Throws ArgumentError on anything else.
Timestamp parse_iso8601(std::string_view text);

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(Timestamp t);

inline std::int64_t to_epoch(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_epoch(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }

Timestamp floor_hour(Timestamp t);
Timestamp floor_day(Timestamp t);
int hour_of_day(Timestamp t);
bool is_hour_aligned(Timestamp t);

// Whole days between the calendar days of `from` and `to` (negative if to < from).
int day_index(Timestamp from, Timestamp to);

}  // namespace parkcast
