#include "agriflow/geo/index.hpp"

#include <algorithm>
#include <cctype>

#include "agriflow/error.hpp"

namespace agriflow::geo {

const char* to_string(IndexKind kind) noexcept {
  switch (kind) {
    case IndexKind::kNdvi: return "NDVI";
    case IndexKind::kNdmi: return "NDMI";
    case IndexKind::kOsavi: return "OSAVI";
  }
  return "?";
}

std::optional<IndexKind> parse_index_kind(std::string_view name) noexcept {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "NDVI") return IndexKind::kNdvi;
  if (upper == "NDMI") return IndexKind::kNdmi;
  if (upper == "OSAVI") return IndexKind::kOsavi;
  return std::nullopt;
}

namespace {

double normalized_difference(double a, double b) noexcept {
  if (is_nodata(a) || is_nodata(b)) return kNoData;
  const double denom = a + b;
  if (denom == 0) return kNoData;
  return (a - b) / denom;
}

}  // namespace

double ndvi(double nir, double red) noexcept { return normalized_difference(nir, red); }

double ndmi(double nir, double swir) noexcept { return normalized_difference(nir, swir); }

double osavi(double nir, double red) noexcept {
  if (is_nodata(nir) || is_nodata(red)) return kNoData;
  const double denom = nir + red + kOsaviSoilFactor;
  if (denom == 0) return kNoData;
  return (nir - red) * (1 + kOsaviSoilFactor) / denom;
}

Grid compute_index(const BandRaster& raster, IndexKind kind) {
  const Grid& nir = raster.band("NIR");
  const Grid& other = raster.band(kind == IndexKind::kNdmi ? "SWIR" : "RED");
  Grid out(nir.width, nir.height);
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const double n = nir.cells[i], o = other.cells[i];
    switch (kind) {
      case IndexKind::kNdvi: out.cells[i] = ndvi(n, o); break;
      case IndexKind::kNdmi: out.cells[i] = ndmi(n, o); break;
      case IndexKind::kOsavi: out.cells[i] = osavi(n, o); break;
    }
  }
  return out;
}

ZonalStats zonal_stats(const BandRaster& frame, const Grid& values, const Parcel& parcel) {
  ZonalStats s;
  double sum = 0;
  for (int row = 0; row < values.height; ++row) {
    for (int col = 0; col < values.width; ++col) {
      const double v = values.at(col, row);
      if (is_nodata(v) || !contains(parcel.boundary, frame.cell_center(col, row))) continue;
      if (s.count == 0) {
        s.min = s.max = v;
      } else {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
      }
      sum += v;
      ++s.count;
    }
  }
  if (s.count) s.mean = sum / static_cast<double>(s.count);
  return s;
}

double grid_mean(const Grid& values) {
  double sum = 0;
  std::size_t n = 0;
  for (double v : values.cells) {
    if (is_nodata(v)) continue;
    sum += v;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : kNoData;
}

const std::array<LegendClass, 5>& legend_classes() {
  static const std::array<LegendClass, 5> classes{{
      {1, -1.0, -0.6, {215, 25, 28}},
      {2, -0.6, -0.2, {253, 174, 97}},
      {3, -0.2, 0.2, {255, 255, 191}},
      {4, 0.2, 0.6, {166, 217, 106}},
      {5, 0.6, 1.0, {26, 150, 65}},
  }};
  return classes;
}

std::optional<int> classify(double value) noexcept {
  if (is_nodata(value)) return std::nullopt;
  for (const auto& c : legend_classes()) {
    if (value <= c.upper) return c.id;
  }
  return 5;
}

}  // namespace agriflow::geo
