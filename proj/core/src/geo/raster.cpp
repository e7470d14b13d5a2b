#include "agriflow/geo/raster.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "agriflow/error.hpp"

namespace agriflow::geo {

namespace {

[[noreturn]] void syntax(int line, const std::string& msg) {
  throw Error(ErrorCode::kSyntax, "raster line " + std::to_string(line) + ": " + msg);
}

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

double number(std::string_view w, int line) {
  double v = 0;
  auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || p != w.data() + w.size()) syntax(line, "'" + std::string(w) + "' is not a number");
  return v;
}

int positive_int(std::string_view w, int line) {
  int v = 0;
  auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || p != w.data() + w.size() || v <= 0) {
    syntax(line, "'" + std::string(w) + "' is not a positive integer");
  }
  return v;
}

std::string num_text(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

}  // namespace

const Grid& BandRaster::band(const std::string& name) const {
  auto it = bands.find(name);
  if (it == bands.end()) throw Error(ErrorCode::kValidation, "raster has no " + name + " band");
  return it->second;
}

double polygon_area(const std::vector<Point>& poly) {
  double twice = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2;
}

std::vector<std::string> validate_parcel(const Parcel& parcel) {
  std::vector<std::string> problems;
  const auto& v = parcel.boundary;
  const std::string who = "parcel '" + parcel.id + "'";
  if (v.size() < 3) {
    problems.push_back(who + " needs at least 3 vertices");
    return problems;
  }
  if (!(polygon_area(v) > 0)) problems.push_back(who + " has zero area");
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_touch(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
        problems.push_back(who + " edges " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " intersect");
        return problems;
      }
    }
  }
  return problems;
}

bool contains(const std::vector<Point>& poly, Point p) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[i], b = poly[(i + 1) % n];
    if (cross(a, b, p) == 0 && on_segment(a, b, p)) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

BandRaster parse_raster(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    start = end + 1;
  }

  BandRaster r;
  std::size_t i = 0;
  auto next = [&](int& line_no) -> std::vector<std::string_view> {
    while (i < lines.size()) {
      line_no = static_cast<int>(i) + 1;
      auto w = words(lines[i++]);
      if (!w.empty() && w[0].front() != '#') return w;
    }
    line_no = static_cast<int>(lines.size());
    return {};
  };

  int ln = 0;
  auto w = next(ln);
  if (w.size() != 2 || w[0] != "AGRIRASTER" || w[1] != "1") syntax(ln, "expected header 'AGRIRASTER 1'");

  bool have_width = false, have_height = false, have_cell = false, have_origin = false;
  for (;;) {
    const std::size_t mark = i;
    w = next(ln);
    if (w.empty()) break;
    if (w[0] == "width" && w.size() == 2) {
      r.width = positive_int(w[1], ln);
      have_width = true;
    } else if (w[0] == "height" && w.size() == 2) {
      r.height = positive_int(w[1], ln);
      have_height = true;
    } else if (w[0] == "cell_size" && w.size() == 2) {
      r.cell_size = number(w[1], ln);
      if (!(r.cell_size > 0)) syntax(ln, "cell_size must be positive");
      have_cell = true;
    } else if (w[0] == "origin" && w.size() == 3) {
      r.origin = {number(w[1], ln), number(w[2], ln)};
      have_origin = true;
    } else if (w[0] == "nodata" && w.size() == 2) {
      r.nodata_marker = number(w[1], ln);
    } else {
      i = mark;
      break;
    }
  }
  if (!have_width || !have_height || !have_cell || !have_origin) {
    syntax(ln, "header needs width, height, cell_size and origin");
  }

  std::vector<std::string> problems;
  for (;;) {
    w = next(ln);
    if (w.empty()) break;
    if (w[0] == "BAND") {
      if (w.size() != 2) syntax(ln, "expected 'BAND <name>'");
      const std::string name(w[1]);
      if (name != "RED" && name != "NIR" && name != "SWIR") syntax(ln, "unknown band '" + name + "'");
      if (r.bands.count(name)) syntax(ln, "band " + name + " appears twice");
      Grid g(r.width, r.height);
      for (int row = 0; row < r.height; ++row) {
        auto cells = next(ln);
        if (static_cast<int>(cells.size()) != r.width) {
          syntax(ln, "band " + name + " row " + std::to_string(row + 1) + " has " + std::to_string(cells.size()) +
                         " values, expected " + std::to_string(r.width));
        }
        for (int col = 0; col < r.width; ++col) {
          const double v = number(cells[static_cast<std::size_t>(col)], ln);
          if (v == r.nodata_marker) continue;
          if (v < 0 || v > 1) {
            problems.push_back("band " + name + " cell (" + std::to_string(col) + "," + std::to_string(row) +
                               ") reflectance " + num_text(v) + " outside [0, 1]");
            continue;
          }
          g.at(col, row) = v;
        }
      }
      r.bands.emplace(name, std::move(g));
    } else if (w[0] == "PARCEL") {
      if (w.size() < 2) syntax(ln, "expected 'PARCEL <id> [name]'");
      Parcel p;
      p.id = std::string(w[1]);
      for (std::size_t k = 2; k < w.size(); ++k) p.name += (k > 2 ? " " : "") + std::string(w[k]);
      auto coords = next(ln);
      if (coords.empty() || coords.size() % 2 != 0) syntax(ln, "parcel " + p.id + " needs x y coordinate pairs");
      for (std::size_t k = 0; k < coords.size(); k += 2) p.boundary.push_back({number(coords[k], ln), number(coords[k + 1], ln)});
      if (p.boundary.size() > 1 && p.boundary.front() == p.boundary.back()) p.boundary.pop_back();
      for (auto& msg : validate_parcel(p)) problems.push_back(std::move(msg));
      for (const auto& other : r.parcels) {
        if (other.id == p.id) syntax(ln, "parcel " + p.id + " appears twice");
      }
      r.parcels.push_back(std::move(p));
    } else {
      syntax(ln, "unexpected '" + std::string(w[0]) + "'");
    }
  }
  if (!problems.empty()) throw Error(ErrorCode::kValidation, "invalid raster", problems);
  return r;
}

std::string serialize_raster(const BandRaster& r) {
  std::ostringstream out;
  out << kRasterMagic << "\n"
      << "width " << r.width << "\n"
      << "height " << r.height << "\n"
      << "cell_size " << num_text(r.cell_size) << "\n"
      << "origin " << num_text(r.origin.x) << " " << num_text(r.origin.y) << "\n"
      << "nodata " << num_text(r.nodata_marker) << "\n";
  for (const auto& [name, g] : r.bands) {
    out << "BAND " << name << "\n";
    for (int row = 0; row < g.height; ++row) {
      for (int col = 0; col < g.width; ++col) {
        const double v = g.at(col, row);
        out << (col ? " " : "") << num_text(is_nodata(v) ? r.nodata_marker : v);
      }
      out << "\n";
    }
  }
  for (const auto& p : r.parcels) {
    out << "PARCEL " << p.id;
    if (!p.name.empty()) out << " " << p.name;
    out << "\n";
    for (std::size_t k = 0; k < p.boundary.size(); ++k) {
      out << (k ? " " : "") << num_text(p.boundary[k].x) << " " << num_text(p.boundary[k].y);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace agriflow::geo
