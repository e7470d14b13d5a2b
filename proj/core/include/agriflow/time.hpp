#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace agriflow {

using Timestamp = std::chrono::sys_seconds;

/// "2025-05-01T06:00:00Z"
std::string format_timestamp(Timestamp t);
/// "2025-05-01"
std::string format_date(Timestamp t);
/// Accepts "YYYY-MM-DDTHH:MM:SSZ" and "YYYY-MM-DD" (midnight UTC).
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// ISO-8601 duration. Years and months are calendar units; the rest are exact.
struct IsoDuration {
  std::int64_t years = 0;
  std::int64_t months = 0;
  std::int64_t seconds = 0;  // weeks, days, hours, minutes, seconds folded in

  bool empty() const noexcept { return years == 0 && months == 0 && seconds == 0; }
  /// Lower bound on the span in seconds (28-day months, 365-day years).
  std::int64_t min_seconds() const noexcept;
  friend bool operator==(const IsoDuration&, const IsoDuration&) = default;
};

std::optional<IsoDuration> parse_iso_duration(std::string_view text);
std::string format_iso_duration(const IsoDuration& d);

/// Adds `times` periods to `t`. Month arithmetic clamps to the last valid day.
Timestamp add_duration(Timestamp t, const IsoDuration& d, std::int64_t times = 1);

/// "R/P1D" (unbounded) or "R5/PT1H" (five repetitions).
struct RepeatingInterval {
  std::optional<std::int64_t> repetitions;
  IsoDuration period;
};

std::optional<RepeatingInterval> parse_repeating_interval(std::string_view text);

}  // namespace agriflow
