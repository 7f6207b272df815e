#pragma once

#include <cstdint>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace hg {

// Milliseconds since the Unix epoch, UTC.
struct Timestamp {
  std::int64_t ms = 0;

  auto operator<=>(const Timestamp&) const = default;

  Timestamp operator+(std::int64_t delta_ms) const { return {ms + delta_ms}; }
  Timestamp operator-(std::int64_t delta_ms) const { return {ms - delta_ms}; }
  std::int64_t operator-(Timestamp other) const { return ms - other.ms; }
};

// Days since the Unix epoch (UTC calendar date).
struct Date {
  std::int32_t days = 0;

  auto operator<=>(const Date&) const = default;

  Date next() const { return {days + 1}; }
  Timestamp start() const { return {std::int64_t{days} * 86'400'000}; }
};

// Milliseconds after midnight.
struct TimeOfDay {
  std::int32_t ms = 0;

  auto operator<=>(const TimeOfDay&) const = default;
};

constexpr std::int64_t kMsPerDay = 86'400'000;

Date date_of(Timestamp ts);
Timestamp at(Date date, TimeOfDay tod);

// 2024-01-15T09:30:00.000Z; parsing also accepts a missing fraction.
std::string format_timestamp(Timestamp ts);
Timestamp parse_timestamp(std::string_view text);
std::optional<Timestamp> try_parse_timestamp(std::string_view text);

// 2024-01-15
std::string format_date(Date date);
Date parse_date(std::string_view text);

// HH:MM or HH:MM:SS; "24:00" is allowed as an end-of-day bound.
std::string format_time_of_day(TimeOfDay tod);
TimeOfDay parse_time_of_day(std::string_view text);

}  // namespace hg
