#include "agriflow/geo/render.hpp"

#include <cstdio>

#include "agriflow/error.hpp"

namespace agriflow::geo {

namespace {

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

nlohmann::json color_json(Rgb c) { return {{"rgb", {c.r, c.g, c.b}}, {"hex", hex(c)}}; }

nlohmann::json number_or_null(double v) { return is_nodata(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

Rgb color_of(double v) {
  const auto cls = classify(v);
  return cls ? legend_classes()[static_cast<std::size_t>(*cls - 1)].color : kNoDataColor;
}

}  // namespace

RenderedMap render_color_map(const BandRaster& frame, const Grid& values, IndexKind kind, RenderMode mode, int scale) {
  if (scale < 1) throw Error(ErrorCode::kInvalidArgument, "scale must be at least 1");
  const int w = values.width, h = values.height;

  // Which parcel (index into frame.parcels) owns each cell centre; first wins.
  std::vector<int> owner(static_cast<std::size_t>(w) * h, -1);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      for (std::size_t p = 0; p < frame.parcels.size(); ++p) {
        if (contains(frame.parcels[p].boundary, frame.cell_center(col, row))) {
          owner[static_cast<std::size_t>(row) * w + col] = static_cast<int>(p);
          break;
        }
      }
    }
  }

  std::vector<ZonalStats> stats;
  for (const auto& p : frame.parcels) stats.push_back(zonal_stats(frame, values, p));

  std::vector<Rgb> cells(static_cast<std::size_t>(w) * h);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t i = static_cast<std::size_t>(row) * w + col;
      const int p = owner[i];
      double v = values.cells[i];
      if (mode == RenderMode::kParcel && p >= 0 && !is_nodata(v)) v = stats[static_cast<std::size_t>(p)].mean;
      cells[i] = color_of(v);
    }
  }
  auto owner_at = [&](int col, int row) {
    if (col < 0 || row < 0 || col >= w || row >= h) return -1;
    return owner[static_cast<std::size_t>(row) * w + col];
  };
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const int p = owner_at(col, row);
      if (p < 0) continue;
      if (owner_at(col - 1, row) != p || owner_at(col + 1, row) != p || owner_at(col, row - 1) != p ||
          owner_at(col, row + 1) != p) {
        cells[static_cast<std::size_t>(row) * w + col] = kOutlineColor;
      }
    }
  }

  RenderedMap out;
  out.image.width = w * scale;
  out.image.height = h * scale;
  out.image.pixels.resize(static_cast<std::size_t>(out.image.width) * out.image.height);
  for (int y = 0; y < out.image.height; ++y) {
    for (int x = 0; x < out.image.width; ++x) {
      out.image.pixels[static_cast<std::size_t>(y) * out.image.width + x] =
          cells[static_cast<std::size_t>(y / scale) * w + x / scale];
    }
  }

  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : legend_classes()) {
    classes.push_back({{"class", c.id},
                       {"lower", c.lower},
                       {"upper", c.upper},
                       {"lower_inclusive", c.id == 1},
                       {"upper_inclusive", true},
                       {"color", color_json(c.color)}});
  }
  nlohmann::json parcels = nlohmann::json::array();
  for (std::size_t p = 0; p < frame.parcels.size(); ++p) {
    const auto cls = classify(stats[p].mean);
    parcels.push_back({{"id", frame.parcels[p].id},
                       {"name", frame.parcels[p].name},
                       {"mean", number_or_null(stats[p].mean)},
                       {"min", number_or_null(stats[p].min)},
                       {"max", number_or_null(stats[p].max)},
                       {"cells", stats[p].count},
                       {"class", cls ? nlohmann::json(*cls) : nlohmann::json(nullptr)}});
  }
  out.legend = {{"index", to_string(kind)},
                {"mode", mode == RenderMode::kCell ? "cell" : "parcel"},
                {"width", out.image.width},
                {"height", out.image.height},
                {"scale", scale},
                {"classes", std::move(classes)},
                {"nodata", color_json(kNoDataColor)},
                {"outline", color_json(kOutlineColor)},
                {"parcels", std::move(parcels)}};
  return out;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size() * 3);
  for (const Rgb& p : image.pixels) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

}  // namespace agriflow::geo
