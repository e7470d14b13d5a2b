#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agriflow/geo/raster.hpp"

namespace agriflow::geo {

enum class IndexKind { kNdvi, kNdmi, kOsavi };

const char* to_string(IndexKind kind) noexcept;
/// Case-insensitive: "ndvi", "NDMI", ...
std::optional<IndexKind> parse_index_kind(std::string_view name) noexcept;

/// Soil adjustment constant of OSAVI.
inline constexpr double kOsaviSoilFactor = 0.16;

/// Scalar forms. NoData in, or a zero denominator, gives NoData.
double ndvi(double nir, double red) noexcept;
double ndmi(double nir, double swir) noexcept;
double osavi(double nir, double red) noexcept;

/// Throws Error(kValidation) naming the missing band.
Grid compute_index(const BandRaster& raster, IndexKind kind);

struct ZonalStats {
  double mean = kNoData;
  double min = kNoData;
  double max = kNoData;
  std::size_t count = 0;  // valid cells whose centre lies in the parcel
};

ZonalStats zonal_stats(const BandRaster& frame, const Grid& values, const Parcel& parcel);

/// Mean over every valid cell; NoData when none.
double grid_mean(const Grid& values);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct LegendClass {
  int id = 0;
  double lower = 0;  // exclusive, except for class 1
  double upper = 0;  // inclusive
  Rgb color;
};

/// Five equal-width classes over [-1, 1], red to green.
const std::array<LegendClass, 5>& legend_classes();
inline constexpr Rgb kNoDataColor{128, 128, 128};
inline constexpr Rgb kOutlineColor{0, 0, 0};

/// Class 1..5 for any valid value (values beyond +/-1 clamp to the end
/// classes); nullopt for NoData.
std::optional<int> classify(double value) noexcept;

}  // namespace agriflow::geo
