#include "agriflow/conn/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "agriflow/conn/report_format.hpp"
#include "agriflow/digest.hpp"
#include "agriflow/error.hpp"
#include "agriflow/geo/index.hpp"

namespace agriflow::conn {

namespace {

using namespace std::chrono_literals;

double round1(double v) { return std::round(v * 10) / 10; }

const DayOverride* override_for(const SimulationConfig& c, Timestamp day) {
  auto it = c.overrides.find(format_date(day));
  return it == c.overrides.end() ? nullptr : &it->second;
}

Timestamp day_input(const VariableMap& in, const char* name) {
  const auto& text = std::get<std::string>(in.at(name));
  auto t = parse_timestamp(text);
  if (!t) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " '" + text + "' is not a date");
  return std::chrono::floor<std::chrono::days>(*t);
}

const std::string& text_input(const VariableMap& in, const char* name) { return std::get<std::string>(in.at(name)); }

class Simulator : public Connector {
 public:
  explicit Simulator(ConnectorDescriptor d) : desc_(std::move(d)) {}
  const ConnectorDescriptor& descriptor() const override { return desc_; }

 private:
  ConnectorDescriptor desc_;
};

ConnectorDescriptor api(std::string kind, std::string title, std::vector<Param> in, std::vector<Param> out) {
  return {std::move(kind), Mode::kApiCall, std::move(title), std::move(in), std::move(out)};
}

constexpr ValueType kDec = ValueType::kDecimal;
constexpr ValueType kTxt = ValueType::kText;
constexpr ValueType kBool = ValueType::kBoolean;
constexpr ValueType kInt = ValueType::kInteger;

class WeatherForecastSim final : public Simulator {
 public:
  explicit WeatherForecastSim(const SimulationConfig& c)
      : Simulator(api("weather.forecast", "Daily weather forecast", {{"location", kTxt}, {"date", kTxt}},
                      {{"t_max", kDec},
                       {"precipitation_total", kDec},
                       {"hail_expected", kBool},
                       {"dew_point", kDec},
                       {"humidity", kDec},
                       {"temperature", kDec}})),
        config_(c) {}

  VariableMap call(const VariableMap& in, ConnectorContext&) override {
    const WeatherForecast f = simulate_weather(config_, day_input(in, "date"));
    return {{"t_max", f.t_max},         {"precipitation_total", f.precipitation_total},
            {"hail_expected", f.hail_expected}, {"dew_point", f.dew_point},
            {"humidity", f.humidity},   {"temperature", f.temperature}};
  }

 private:
  SimulationConfig config_;
};

class DiseaseWarningSim final : public Simulator {
 public:
  explicit DiseaseWarningSim(const SimulationConfig& c)
      : Simulator(api("disease.warning", "Disease outbreak probability warning", {{"location", kTxt}, {"date", kTxt}},
                      {{"warning", kBool}, {"pathogen", kTxt}})),
        config_(c) {}

  VariableMap call(const VariableMap& in, ConnectorContext&) override {
    const DiseaseWarning w = simulate_disease(config_, day_input(in, "date"));
    return {{"warning", w.warning}, {"pathogen", w.pathogen}};
  }

 private:
  SimulationConfig config_;
};

class IotDailySim final : public Simulator {
 public:
  explicit IotDailySim(const SimulationConfig& c)
      : Simulator(api("iot.daily", "On-site IoT sensor readings", {{"location", kTxt}, {"date", kTxt}},
                      {{"temperature", kDec}, {"humidity", kDec}, {"precipitation", kDec}})),
        config_(c) {}

  VariableMap call(const VariableMap& in, ConnectorContext&) override {
    const DailyConditions d = simulate_sensors(config_, day_input(in, "date"));
    return {{"temperature", d.temperature}, {"humidity", d.humidity}, {"precipitation", d.precipitation}};
  }

 private:
  SimulationConfig config_;
};

// Daily conditions of the N days before `date`: readings journaled by iot.daily
// jobs where they exist, otherwise the sensor archive (the simulator).
class IotHistorySim final : public Simulator {
 public:
  explicit IotHistorySim(const SimulationConfig& c)
      : Simulator(api("iot.history", "IoT conditions of the last days",
                      {{"location", kTxt}, {"date", kTxt}, {"days", kInt}},
                      {{"days", kInt},
                       {"temperature_mean", kDec},
                       {"humidity_mean", kDec},
                       {"precipitation_total", kDec},
                       {"records", kTxt}})),
        config_(c) {}

  VariableMap call(const VariableMap& in, ConnectorContext& ctx) override {
    const Timestamp day = day_input(in, "date");
    const std::int64_t n = std::get<std::int64_t>(in.at("days"));
    if (n < 1 || n > 366) throw Error(ErrorCode::kInvalidArgument, "days must be in [1, 366]");

    std::map<std::string, DailyConditions> journaled;
    if (ctx.history) {
      store::HistoryFilter f;
      f.kind = store::EventKind::kJobCompleted;
      f.from = day - std::chrono::days(n);
      f.to = day;
      f.payload_equals.emplace_back("connector", "iot.daily");
      for (const auto& r : ctx.history(f)) {
        const auto& out = r.payload.at("outputs");
        DailyConditions d;
        d.date = format_date(r.at);
        d.temperature = out.at("temperature").get<double>();
        d.humidity = out.at("humidity").get<double>();
        d.precipitation = out.at("precipitation").get<double>();
        journaled[d.date] = d;  // the latest reading of a day wins
      }
    }

    double t = 0, h = 0, p = 0;
    std::string records;
    for (std::int64_t k = n; k >= 1; --k) {
      const Timestamp d = day - std::chrono::days(k);
      DailyConditions c;
      std::string source = "sensor";
      if (auto it = journaled.find(format_date(d)); it != journaled.end()) {
        c = it->second;
      } else {
        c = simulate_sensors(config_, d);
        source = "archive";
      }
      t += c.temperature;
      h += c.humidity;
      p += c.precipitation;
      if (!records.empty()) records += "; ";
      records += c.date + " " + source + " t=" + format_decimal(c.temperature) + " h=" + format_decimal(c.humidity) +
                 " p=" + format_decimal(c.precipitation);
    }
    const double dn = static_cast<double>(n);
    return {{"days", n},
            {"temperature_mean", round1(t / dn)},
            {"humidity_mean", round1(h / dn)},
            {"precipitation_total", round1(p)},
            {"records", records}};
  }

 private:
  SimulationConfig config_;
};

// Most recent field actions, read from completed tasks in the journal.
class FarmHistorySim final : public Simulator {
 public:
  FarmHistorySim()
      : Simulator(api("farm.history", "Last irrigation and spraying", {{"location", kTxt}},
                      {{"last_irrigation", kTxt}, {"last_spraying", kTxt}})) {}

  VariableMap call(const VariableMap&, ConnectorContext& ctx) override {
    auto last = [&](const char* action) -> std::string {
      if (!ctx.history) return "never";
      store::HistoryFilter f;
      f.kind = store::EventKind::kTaskCompleted;
      f.payload_equals.emplace_back("values.action", action);
      f.last = 1;
      const auto hits = ctx.history(f);
      return hits.empty() ? "never" : format_date(hits.back().at);
    };
    return {{"last_irrigation", last("irrigation")}, {"last_spraying", last("spraying")}};
  }
};

class NotifySim final : public Simulator {
 public:
  NotifySim()
      : Simulator(api("notify.alert", "Dashboard notification",
                      {{"event", kTxt}, {"severity", kTxt}, {"message", kTxt}, {"recipient_role", kTxt}}, {})) {}

  VariableMap call(const VariableMap& in, ConnectorContext& ctx) override {
    const std::string& severity = text_input(in, "severity");
    if (severity != "info" && severity != "warning" && severity != "alert") {
      throw Error(ErrorCode::kInvalidArgument, "unknown severity '" + severity + "'");
    }
    if (!ctx.notify) throw Error(ErrorCode::kConnector, "no notification channel");
    ctx.notify({text_input(in, "recipient_role"), severity, text_input(in, "event"), text_input(in, "message")});
    return {};
  }
};

class SatelliteSim final : public Simulator {
 public:
  explicit SatelliteSim(const SimulationConfig& c)
      : Simulator(api("satellite.bands", "Satellite band scene with parcel indexes",
                      {{"location", kTxt}, {"date", kTxt}},
                      {{"ndvi_mean", kDec}, {"ndmi_mean", kDec}, {"osavi_mean", kDec}, {"scene", ValueType::kDocument}})),
        config_(c) {}

  VariableMap call(const VariableMap& in, ConnectorContext& ctx) override {
    const Timestamp day = day_input(in, "date");
    const geo::BandRaster scene = simulate_scene(config_, day);
    if (!ctx.store_document) throw Error(ErrorCode::kConnector, "no document store");
    const nlohmann::json meta{{"date", format_date(day)}, {"location", text_input(in, "location")}};
    const DocumentRef ref = ctx.store_document("satellite.scene", geo::serialize_raster(scene), meta, {});
    auto mean = [&](geo::IndexKind k) { return geo::grid_mean(geo::compute_index(scene, k)); };
    return {{"ndvi_mean", mean(geo::IndexKind::kNdvi)},
            {"ndmi_mean", mean(geo::IndexKind::kNdmi)},
            {"osavi_mean", mean(geo::IndexKind::kOsavi)},
            {"scene", ref}};
  }

 private:
  SimulationConfig config_;
};

class ReportUpload final : public Connector {
 public:
  explicit ReportUpload(const ConnectorDescriptor& d) : desc_(d) {}
  const ConnectorDescriptor& descriptor() const override { return desc_; }
  VariableMap extract(std::string_view bytes) const override { return parse_report(bytes, desc_); }

 private:
  const ConnectorDescriptor& desc_;
};

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::string_view provider, std::string_view key) {
  const std::string digest =
      sha256_hex(std::to_string(seed) + "|" + std::string(provider) + "|" + std::string(key));
  engine_.seed(std::stoull(digest.substr(0, 16), nullptr, 16));
}

double SeededRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double dew_point(double temperature, double humidity) {
  constexpr double a = 17.62, b = 243.12;
  const double gamma = std::log(std::max(humidity, 1.0) / 100.0) + a * temperature / (b + temperature);
  return b * gamma / (a - gamma);
}

WeatherForecast simulate_weather(const SimulationConfig& c, Timestamp day) {
  SeededRng rng(c.seed, "weather.forecast", c.location + "|" + format_date(day));
  WeatherForecast f;
  f.date = format_date(day);
  f.t_max = round1(18 + 14 * rng.uniform());
  const double wet = rng.uniform();
  const double amount = rng.uniform();
  f.precipitation_total = wet < 0.75 ? 0.0 : round1(5 * amount);
  const double spread = rng.uniform();
  const double rh = rng.uniform();
  if (const DayOverride* o = override_for(c, day)) {
    if (o->t_max) f.t_max = *o->t_max;
    if (o->precipitation_total) f.precipitation_total = *o->precipitation_total;
    if (o->hail_expected) f.hail_expected = *o->hail_expected;
  }
  f.temperature = round1(f.t_max - 5 - 4 * spread);
  f.humidity = round1(std::clamp(45 + 30 * rh + 4 * f.precipitation_total, 0.0, 100.0));
  f.dew_point = round1(dew_point(f.temperature, f.humidity));
  return f;
}

std::vector<WeatherForecast> simulate_weather_stream(const SimulationConfig& c, Timestamp start, int days) {
  std::vector<WeatherForecast> out;
  const Timestamp first = std::chrono::floor<std::chrono::days>(start);
  for (int i = 0; i < days; ++i) out.push_back(simulate_weather(c, first + std::chrono::days(i)));
  return out;
}

DiseaseWarning simulate_disease(const SimulationConfig& c, Timestamp day) {
  DiseaseWarning w;
  w.date = format_date(day);
  if (const DayOverride* o = override_for(c, day); o && o->disease_warning) w.warning = *o->disease_warning;
  w.pathogen = w.warning ? "downy mildew" : "none";
  return w;
}

DailyConditions simulate_sensors(const SimulationConfig& c, Timestamp day) {
  const WeatherForecast f = simulate_weather(c, day);
  SeededRng rng(c.seed, "iot.daily", c.location + "|" + f.date);
  DailyConditions d;
  d.date = f.date;
  d.temperature = round1(f.temperature + 2 * (rng.uniform() - 0.5));
  d.humidity = round1(std::clamp(f.humidity + 6 * (rng.uniform() - 0.5), 0.0, 100.0));
  d.precipitation = round1(f.precipitation_total * (0.9 + 0.2 * rng.uniform()));
  return d;
}

geo::BandRaster simulate_scene(const SimulationConfig& c, Timestamp day) {
  const int n = c.raster_size;
  if (n < 8) throw Error(ErrorCode::kInvalidArgument, "raster_size must be at least 8");
  geo::BandRaster r;
  r.width = r.height = n;
  r.cell_size = c.cell_size;
  r.origin = {0, 0};
  const double s = c.cell_size;
  const double half = n / 2.0;
  // West half: two vineyard blocks split north/south; east half: the neighbour.
  r.parcels.push_back({"P1", "Malagousia block", {{s, s}, {half * s, s}, {half * s, half * s}, {s, half * s}}});
  r.parcels.push_back(
      {"P2", "Assyrtiko block", {{s, half * s}, {half * s, half * s}, {half * s, (n - 1) * s}, {s, (n - 1) * s}}});
  r.parcels.push_back({"P3", "Neighbouring field", {{half * s, s}, {(n - 1) * s, s}, {(n - 1) * s, (n - 1) * s},
                                                    {half * s, (n - 1) * s}}});

  SeededRng rng(c.seed, "satellite.bands", c.location + "|" + format_date(day));
  const double season = rng.uniform();
  const double vigour[3] = {0.55 + 0.25 * season, 0.35 + 0.3 * rng.uniform(), 0.1 + 0.2 * rng.uniform()};
  geo::Grid red(n, n), nir(n, n), swir(n, n);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const geo::Point p = r.cell_center(col, row);
      double v = 0.05;  // bare ground outside parcels
      for (std::size_t k = 0; k < r.parcels.size(); ++k) {
        if (geo::contains(r.parcels[k].boundary, p)) {
          v = vigour[k];
          break;
        }
      }
      const double noise = 0.04 * (rng.uniform() - 0.5);
      const double cloud = rng.uniform();
      if (cloud < 0.01) continue;  // NoData
      red.at(col, row) = std::clamp(0.12 - 0.08 * v + std::abs(noise) / 4, 0.0, 1.0);
      nir.at(col, row) = std::clamp(0.2 + 0.5 * v + noise, 0.0, 1.0);
      swir.at(col, row) = std::clamp(0.3 - 0.15 * v + noise / 2, 0.0, 1.0);
    }
  }
  r.bands.emplace("RED", std::move(red));
  r.bands.emplace("NIR", std::move(nir));
  r.bands.emplace("SWIR", std::move(swir));
  return r;
}

const ConnectorDescriptor& qc_analysis_descriptor() {
  static const ConnectorDescriptor d{"qc.analysis", Mode::kFileUpload, "Smart quality control analysis", {},
                                     {{"sugar_content", kDec}, {"acidity", kDec}}};
  return d;
}

const ConnectorDescriptor& drone_report_descriptor() {
  static const ConnectorDescriptor d{"drone.report",
                                     Mode::kFileUpload,
                                     "Drone sensing final report",
                                     {},
                                     {{"flight_id", kTxt},
                                      {"area_ha", kDec},
                                      {"stressed_area_pct", kDec},
                                      {"summary", kTxt}}};
  return d;
}

void register_simulators(ConnectorRegistry& registry, const SimulationConfig& config,
                         const std::optional<std::set<std::string>>& only) {
  std::vector<std::unique_ptr<Connector>> all;
  all.push_back(std::make_unique<WeatherForecastSim>(config));
  all.push_back(std::make_unique<DiseaseWarningSim>(config));
  all.push_back(std::make_unique<IotDailySim>(config));
  all.push_back(std::make_unique<IotHistorySim>(config));
  all.push_back(std::make_unique<FarmHistorySim>());
  all.push_back(std::make_unique<NotifySim>());
  all.push_back(std::make_unique<SatelliteSim>(config));
  all.push_back(std::make_unique<ReportUpload>(qc_analysis_descriptor()));
  all.push_back(std::make_unique<ReportUpload>(drone_report_descriptor()));
  if (only) {
    for (const auto& kind : *only) {
      const bool known =
          std::any_of(all.begin(), all.end(), [&](const auto& c) { return c->descriptor().kind == kind; });
      if (!known) throw Error(ErrorCode::kInvalidArgument, "no simulator for connector kind '" + kind + "'");
    }
  }
  for (auto& c : all) {
    if (!only || only->count(c->descriptor().kind)) registry.add(std::move(c));
  }
}

}  // namespace agriflow::conn
