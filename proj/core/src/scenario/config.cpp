#include <charconv>
#include <sstream>

#include "agriflow/error.hpp"
#include "agriflow/scenario/scenario.hpp"
#include "agriflow/value.hpp"

namespace agriflow::scenario {

namespace {

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
std::optional<T> number(std::string_view w) {
  T v{};
  auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || p != w.data() + w.size()) return std::nullopt;
  return v;
}

std::optional<bool> boolean(std::string_view w) {
  if (w == "true") return true;
  if (w == "false") return false;
  return std::nullopt;
}

// Applies "key=value" to an override; returns an error message or empty.
std::string apply_override(DayOverrides& o, std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos) return "expected key=value, got '" + std::string(kv) + "'";
  const std::string_view key = kv.substr(0, eq), value = kv.substr(eq + 1);
  if (key == "t_max" || key == "precipitation_total") {
    const auto d = number<double>(value);
    if (!d) return std::string(key) + " needs a number, got '" + std::string(value) + "'";
    (key == "t_max" ? o.t_max : o.precipitation_total) = *d;
    return {};
  }
  std::optional<bool>* slot = key == "hail_expected"     ? &o.hail_expected
                              : key == "disease_warning" ? &o.disease_warning
                              : key == "qc_needed"       ? &o.qc_needed
                                                         : nullptr;
  if (!slot) return "unknown override '" + std::string(key) + "'";
  const auto b = boolean(value);
  if (!b) return std::string(key) + " needs true or false, got '" + std::string(value) + "'";
  *slot = *b;
  return {};
}

std::string apply_agent(AgentPolicy& a, std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos) return "expected key=value, got '" + std::string(kv) + "'";
  const std::string_view key = kv.substr(0, eq);
  const auto b = boolean(kv.substr(eq + 1));
  if (!b) return std::string(key) + " needs true or false";
  if (key == "qc_needed") a.qc_needed = *b;
  else if (key == "drone_on_disease") a.drone_on_disease = *b;
  else if (key == "drone_always") a.drone_always = *b;
  else return "unknown agent setting '" + std::string(key) + "'";
  return {};
}

void check_days(const ScenarioConfig& c) {
  std::vector<std::string> problems;
  if (c.days < 1) problems.push_back("days must be at least 1");
  for (const auto& [day, o] : c.overrides) {
    if (day < 1 || day > c.days) {
      problems.push_back("override for day " + std::to_string(day) + " is outside 1.." + std::to_string(c.days));
    }
  }
  if (!problems.empty()) throw Error(ErrorCode::kValidation, "invalid scenario", problems);
}

}  // namespace

std::string ScenarioConfig::date_of_day(int day) const { return format_date(start + std::chrono::days(day)); }

void ScenarioConfig::add_override(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto day = colon == std::string_view::npos ? std::nullopt : number<int>(spec.substr(0, colon));
  if (!day) throw Error(ErrorCode::kInvalidArgument, "override '" + std::string(spec) + "' is not day:key=value");
  DayOverrides& o = overrides[*day];
  if (auto err = apply_override(o, spec.substr(colon + 1)); !err.empty()) throw Error(ErrorCode::kInvalidArgument, err);
  check_days(*this);
}

ScenarioConfig parse_scenario_config(std::string_view text) {
  ScenarioConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  int ln = 0;
  auto fail = [&](const std::string& msg) { throw Error(ErrorCode::kSyntax, "scenario line " + std::to_string(ln) + ": " + msg); };
  while (std::getline(in, raw)) {
    ++ln;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto w = words(line);
    if (w.empty()) continue;
    if (w[0] == "seed" && w.size() == 2) {
      const auto v = number<std::uint64_t>(w[1]);
      if (!v) fail("seed must be a non-negative integer");
      c.seed = *v;
    } else if (w[0] == "start" && w.size() == 2) {
      const auto t = parse_timestamp(w[1]);
      if (!t) fail("start must be a UTC timestamp such as 2025-04-30T06:00:00Z");
      c.start = *t;
    } else if (w[0] == "days" && w.size() == 2) {
      const auto v = number<int>(w[1]);
      if (!v || *v < 1) fail("days must be a positive integer");
      c.days = *v;
    } else if (w[0] == "location" && w.size() == 2) {
      c.location = std::string(w[1]);
    } else if (w[0] == "agent" && w.size() >= 2) {
      for (std::size_t k = 1; k < w.size(); ++k) {
        if (auto err = apply_agent(c.agents, w[k]); !err.empty()) fail(err);
      }
    } else if (w[0] == "override" && w.size() >= 3) {
      const auto day = number<int>(w[1]);
      if (!day) fail("override needs a day number");
      DayOverrides& o = c.overrides[*day];
      for (std::size_t k = 2; k < w.size(); ++k) {
        if (auto err = apply_override(o, w[k]); !err.empty()) fail(err);
      }
    } else {
      fail("unexpected '" + std::string(w[0]) + "'");
    }
  }
  check_days(c);
  return c;
}

std::string to_text(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "seed " << c.seed << "\n"
      << "start " << format_timestamp(c.start) << "\n"
      << "days " << c.days << "\n"
      << "location " << c.location << "\n"
      << "agent qc_needed=" << (c.agents.qc_needed ? "true" : "false")
      << " drone_on_disease=" << (c.agents.drone_on_disease ? "true" : "false")
      << " drone_always=" << (c.agents.drone_always ? "true" : "false") << "\n";
  auto b = [](bool v) { return v ? "true" : "false"; };
  for (const auto& [day, o] : c.overrides) {
    out << "override " << day;
    if (o.t_max) out << " t_max=" << format_decimal(*o.t_max);
    if (o.precipitation_total) out << " precipitation_total=" << format_decimal(*o.precipitation_total);
    if (o.hail_expected) out << " hail_expected=" << b(*o.hail_expected);
    if (o.disease_warning) out << " disease_warning=" << b(*o.disease_warning);
    if (o.qc_needed) out << " qc_needed=" << b(*o.qc_needed);
    out << "\n";
  }
  return out.str();
}

}  // namespace agriflow::scenario
