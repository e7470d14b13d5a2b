#include "agriflow/time.hpp"

#include <charconv>
#include <cstdio>

namespace agriflow {

using namespace std::chrono;

std::string format_timestamp(Timestamp t) {
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), long(hms.hours().count()),
                long(hms.minutes().count()), long(hms.seconds().count()));
  return buf;
}

std::string format_date(Timestamp t) { return format_timestamp(t).substr(0, 10); }

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !read_int(s, 5, 2, mo) ||
      s[7] != '-' || !read_int(s, 8, 2, d)) {
    return std::nullopt;
  }
  if (s.size() != 10) {
    if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z' ||
        !read_int(s, 11, 2, h) || !read_int(s, 14, 2, mi) || !read_int(s, 17, 2, sec)) {
      return std::nullopt;
    }
    if (h > 23 || mi > 59 || sec > 59) return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{unsigned(mo)}, day{unsigned(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec};
}

std::int64_t IsoDuration::min_seconds() const noexcept {
  return years * 365 * 86400 + months * 28 * 86400 + seconds;
}

std::optional<IsoDuration> parse_iso_duration(std::string_view s) {
  if (s.size() < 3 || s[0] != 'P') return std::nullopt;
  IsoDuration out;
  bool in_time = false;
  bool any = false;
  std::size_t i = 1;
  while (i < s.size()) {
    if (s[i] == 'T') {
      if (in_time || i + 1 == s.size()) return std::nullopt;
      in_time = true;
      ++i;
      continue;
    }
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), n);
    if (ec != std::errc{} || ptr == s.data() + s.size() || n < 0) return std::nullopt;
    i = static_cast<std::size_t>(ptr - s.data());
    const char unit = s[i++];
    any = true;
    if (!in_time) {
      switch (unit) {
        case 'Y': out.years += n; break;
        case 'M': out.months += n; break;
        case 'W': out.seconds += n * 7 * 86400; break;
        case 'D': out.seconds += n * 86400; break;
        default: return std::nullopt;
      }
    } else {
      switch (unit) {
        case 'H': out.seconds += n * 3600; break;
        case 'M': out.seconds += n * 60; break;
        case 'S': out.seconds += n; break;
        default: return std::nullopt;
      }
    }
  }
  if (!any) return std::nullopt;
  return out;
}

std::string format_iso_duration(const IsoDuration& d) {
  std::string out = "P";
  if (d.years) out += std::to_string(d.years) + "Y";
  if (d.months) out += std::to_string(d.months) + "M";
  std::int64_t rest = d.seconds;
  if (rest / 86400) out += std::to_string(rest / 86400) + "D";
  rest %= 86400;
  if (rest) {
    out += "T";
    if (rest / 3600) out += std::to_string(rest / 3600) + "H";
    if ((rest % 3600) / 60) out += std::to_string((rest % 3600) / 60) + "M";
    if (rest % 60) out += std::to_string(rest % 60) + "S";
  }
  if (out == "P") out += "T0S";
  return out;
}

Timestamp add_duration(Timestamp t, const IsoDuration& d, std::int64_t times) {
  const auto day = floor<days>(t);
  const auto time_of_day = t - day;
  year_month_day ymd{day};
  const std::int64_t total_months = (d.years * 12 + d.months) * times;
  if (total_months != 0) {
    const year_month ym = year_month{ymd.year(), ymd.month()} + months{total_months};
    const auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
    ymd = year_month_day{ym.year(), ym.month(), std::min(ymd.day(), last)};
  }
  return Timestamp{sys_days{ymd}} + time_of_day + seconds{d.seconds * times};
}

std::optional<RepeatingInterval> parse_repeating_interval(std::string_view s) {
  if (s.empty() || s[0] != 'R') return std::nullopt;
  const auto slash = s.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  RepeatingInterval out;
  if (slash > 1) {
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + slash, n);
    if (ec != std::errc{} || ptr != s.data() + slash || n <= 0) return std::nullopt;
    out.repetitions = n;
  }
  auto period = parse_iso_duration(s.substr(slash + 1));
  if (!period || period->empty()) return std::nullopt;
  out.period = *period;
  return out;
}

}  // namespace agriflow
