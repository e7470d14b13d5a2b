#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace agriflow::geo {

/// NoData is NaN in memory and the header's marker in files.
inline constexpr double kNoData = std::numeric_limits<double>::quiet_NaN();
inline bool is_nodata(double v) noexcept { return std::isnan(v); }

/// Row-major grid, row 0 at the top.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> cells;

  Grid() = default;
  Grid(int w, int h, double fill = kNoData) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, fill) {}
  double at(int col, int row) const { return cells[static_cast<std::size_t>(row) * width + col]; }
  double& at(int col, int row) { return cells[static_cast<std::size_t>(row) * width + col]; }
};

struct Point {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Field parcel. The boundary is implicitly closed (last vertex joins the first).
struct Parcel {
  std::string id;
  std::string name;
  std::vector<Point> boundary;
};

/// Cell (col, row) covers x in [origin.x + col*cell_size, +cell_size) and
/// y in [origin.y + row*cell_size, +cell_size); y grows downwards with rows.
struct BandRaster {
  int width = 0;
  int height = 0;
  double cell_size = 1.0;
  Point origin;
  double nodata_marker = -9999.0;
  std::map<std::string, Grid> bands;  // RED, NIR, SWIR
  std::vector<Parcel> parcels;

  Point cell_center(int col, int row) const {
    return {origin.x + (col + 0.5) * cell_size, origin.y + (row + 0.5) * cell_size};
  }
  const Grid& band(const std::string& name) const;
};

inline constexpr const char* kRasterMagic = "AGRIRASTER 1";

/// Parses the text raster format. Throws Error(kSyntax) with a line number
/// for malformed text and Error(kValidation) for rule violations
/// (reflectance outside [0, 1], degenerate or self-intersecting parcels).
BandRaster parse_raster(std::string_view text);
std::string serialize_raster(const BandRaster& raster);

/// Problems with a parcel polygon; empty when valid.
std::vector<std::string> validate_parcel(const Parcel& parcel);

double polygon_area(const std::vector<Point>& polygon);

/// Even-odd containment; points on an edge count as inside.
bool contains(const std::vector<Point>& polygon, Point p);

}  // namespace agriflow::geo
