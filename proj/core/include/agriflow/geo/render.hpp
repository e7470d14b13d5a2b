#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agriflow/geo/index.hpp"

namespace agriflow::geo {

/// kCell paints every cell by its own value; kParcel paints cells inside a
/// parcel by the parcel mean and the rest by their own value.
enum class RenderMode { kCell, kParcel };

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major
  Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderedMap {
  Image image;
  nlohmann::json legend;
};

/// One cell becomes `scale` x `scale` pixels. Parcel outlines are the cells
/// inside a parcel with a 4-neighbour outside it (or on the raster edge).
RenderedMap render_color_map(const BandRaster& frame, const Grid& values, IndexKind kind,
                             RenderMode mode = RenderMode::kParcel, int scale = 1);

/// Binary portable pixmap.
std::string encode_ppm(const Image& image);

}  // namespace agriflow::geo
