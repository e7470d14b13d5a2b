#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "agriflow/conn/connector.hpp"
#include "agriflow/geo/raster.hpp"
#include "agriflow/time.hpp"

namespace agriflow::conn {

/// Forced provider values for one calendar day.
struct DayOverride {
  std::optional<double> t_max;
  std::optional<double> precipitation_total;
  std::optional<bool> hail_expected;
  std::optional<bool> disease_warning;
};

struct SimulationConfig {
  std::uint64_t seed = 42;
  std::string location = "orphanos-vineyard";
  std::map<std::string, DayOverride> overrides;  // by "YYYY-MM-DD"
  int raster_size = 24;
  double cell_size = 10;
};

/// Deterministic generator for one (seed, provider, key) triple.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::string_view provider, std::string_view key);
  /// Uniform in [0, 1) with 53 bits.
  double uniform();

 private:
  std::mt19937_64 engine_;
};

struct WeatherForecast {
  std::string date;
  double t_max = 0;
  double precipitation_total = 0;
  bool hail_expected = false;
  double dew_point = 0;
  double humidity = 0;
  double temperature = 0;
};

struct DiseaseWarning {
  std::string date;
  bool warning = false;
  std::string pathogen;
};

struct DailyConditions {
  std::string date;
  double temperature = 0;
  double humidity = 0;
  double precipitation = 0;
};

/// Quiet-season weather: t_max in [18, 32), light or no rain, no hail, unless
/// overridden. Values are rounded to one decimal.
WeatherForecast simulate_weather(const SimulationConfig& config, Timestamp day);
std::vector<WeatherForecast> simulate_weather_stream(const SimulationConfig& config, Timestamp start, int days);
DiseaseWarning simulate_disease(const SimulationConfig& config, Timestamp day);
/// On-site sensor readings: the day's forecast plus sensor noise.
DailyConditions simulate_sensors(const SimulationConfig& config, Timestamp day);
/// Three parcels over a raster_size square scene, vigour varying by day.
geo::BandRaster simulate_scene(const SimulationConfig& config, Timestamp day);

/// Dew point from air temperature and relative humidity (Magnus formula).
double dew_point(double temperature, double humidity);

/// All simulated providers plus the two file-upload kinds, or only the kinds
/// in `only`. Throws kInvalidArgument for a kind that has no simulator.
void register_simulators(ConnectorRegistry& registry, const SimulationConfig& config,
                         const std::optional<std::set<std::string>>& only = std::nullopt);

/// Output schemas of the file-upload kinds.
const ConnectorDescriptor& qc_analysis_descriptor();
const ConnectorDescriptor& drone_report_descriptor();

}  // namespace agriflow::conn
