#include <gtest/gtest.h>

#include <random>

#include "agriflow/error.hpp"
#include "agriflow/geo/index.hpp"
#include "agriflow/geo/raster.hpp"
#include "agriflow/geo/render.hpp"
#include "geo_oracles.hpp"

using namespace agriflow;
using namespace agriflow::geo;
using namespace agriflow::testkit;

namespace {

BandRaster uniform(int w, int h, double nir, double red) {
  BandRaster r;
  r.width = w;
  r.height = h;
  r.bands.emplace("NIR", Grid(w, h, nir));
  r.bands.emplace("RED", Grid(w, h, red));
  return r;
}

Parcel square(const std::string& id, double x0, double y0, double x1, double y1) {
  return Parcel{id, id, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

const char* kSmallRaster = R"(AGRIRASTER 1
# two by two
width 2
height 2
cell_size 10
origin 100 200
nodata -9999
BAND RED
0.2 0.1
-9999 0.5
BAND NIR
0.8 0.5
0.4 0.5
PARCEL P1 North block
100 200 120 200 120 210 100 210
)";

}  // namespace

TEST(IndexFormulas, HandValues) {
  EXPECT_EQ(ndvi(0.5, 0.5), 0.0);
  EXPECT_NEAR(ndvi(0.8, 0.2), 0.6, 1e-15);
  EXPECT_NEAR(osavi(0.8, 0.2), 0.6, 1e-15);
  EXPECT_TRUE(is_nodata(ndvi(0, 0)));
  EXPECT_TRUE(is_nodata(ndmi(kNoData, 0.3)));
  EXPECT_FALSE(is_nodata(osavi(0, 0)));  // L keeps the denominator positive
}

TEST(IndexFormulas, MissingBandIsNamed) {
  const BandRaster r = uniform(2, 2, 0.5, 0.1);
  try {
    compute_index(r, IndexKind::kNdmi);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("SWIR"), std::string::npos);
  }
}

TEST(IndexFormulas, GridMatchesScalarOracle) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const BandRaster r = random_raster(rng);
    const Grid nv = compute_index(r, IndexKind::kNdvi);
    const Grid nm = compute_index(r, IndexKind::kNdmi);
    const Grid os = compute_index(r, IndexKind::kOsavi);
    for (std::size_t i = 0; i < nv.cells.size(); ++i) {
      const double nir = r.band("NIR").cells[i], red = r.band("RED").cells[i], swir = r.band("SWIR").cells[i];
      const bool nd_rn = std::isnan(nir) || std::isnan(red);
      const auto a = nd_rn ? std::nullopt : ref_ndvi(nir, red);
      const auto b = std::isnan(nir) || std::isnan(swir) ? std::nullopt : ref_ndmi(nir, swir);
      const auto c = nd_rn ? std::nullopt : ref_osavi(nir, red);
      ASSERT_EQ(is_nodata(nv.cells[i]), !a.has_value());
      ASSERT_EQ(is_nodata(nm.cells[i]), !b.has_value());
      ASSERT_EQ(is_nodata(os.cells[i]), !c.has_value());
      if (a) ASSERT_LE(std::abs(nv.cells[i] - *a), 1e-12);
      if (b) ASSERT_LE(std::abs(nm.cells[i] - *b), 1e-12);
      if (c) ASSERT_LE(std::abs(os.cells[i] - *c), 1e-12);
    }
  }
}

TEST(IndexFormulas, RangeInvariants) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double nir = u(rng), red = u(rng), swir = u(rng);
    const double a = ndvi(nir, red), b = ndmi(nir, swir), c = osavi(nir, red);
    ASSERT_TRUE(is_nodata(a) || (a >= -1 && a <= 1));
    ASSERT_TRUE(is_nodata(b) || (b >= -1 && b <= 1));
    ASSERT_LT(std::abs(c), 1.16);
    ASSERT_TRUE(classify(c).has_value());
  }
}

TEST(IndexFormulas, NdviIncreasesWithNir) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.001, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double red = u(rng), n1 = u(rng), n2 = u(rng);
    if (n1 == n2) continue;
    ASSERT_EQ(n1 < n2, ndvi(n1, red) < ndvi(n2, red));
  }
}

TEST(Classification, BreakpointsAreRightClosed) {
  EXPECT_EQ(classify(-1.0), 1);
  EXPECT_EQ(classify(-0.6), 1);
  EXPECT_EQ(classify(-0.59), 2);
  EXPECT_EQ(classify(0.2), 3);
  EXPECT_EQ(classify(0.6), 4);
  EXPECT_EQ(classify(0.61), 5);
  EXPECT_EQ(classify(1.1), 5);
  EXPECT_EQ(classify(-1.1), 1);
  EXPECT_FALSE(classify(kNoData).has_value());
}

TEST(ZonalStats, UniformSquareOverFourCentres) {
  BandRaster r = uniform(4, 4, 0.8, 0.2);
  const Grid g = compute_index(r, IndexKind::kNdvi);
  const ZonalStats s = zonal_stats(r, g, square("P", 0.2, 0.2, 2.0, 2.0));
  EXPECT_EQ(s.count, 4u);
  EXPECT_NEAR(s.mean, 0.6, 1e-15);
}

TEST(ZonalStats, CentreOnEdgeCountsInside) {
  BandRaster r = uniform(4, 4, 0.8, 0.2);
  const Grid g = compute_index(r, IndexKind::kNdvi);
  EXPECT_EQ(zonal_stats(r, g, square("P", 0.5, 0.5, 1.5, 1.5)).count, 4u);
}

TEST(ZonalStats, OutsideExtentIsEmpty) {
  BandRaster r = uniform(4, 4, 0.8, 0.2);
  const Grid g = compute_index(r, IndexKind::kNdvi);
  const ZonalStats s = zonal_stats(r, g, square("P", 10, 10, 20, 20));
  EXPECT_EQ(s.count, 0u);
  EXPECT_TRUE(is_nodata(s.mean));
}

TEST(ZonalStats, MatchesBruteForceOnRandomConvexParcels) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 100; ++k) {
    BandRaster r = random_raster(rng);
    const Grid g = compute_index(r, IndexKind::kNdvi);
    const auto poly = random_convex_polygon(rng, 16, 16);
    const ZonalStats s = zonal_stats(r, g, Parcel{"p", "p", poly});
    const RefStats ref = ref_zonal(r, g, poly);
    ASSERT_EQ(s.count, ref.count);
    if (ref.count) {
      ASSERT_EQ(s.min, ref.min);
      ASSERT_EQ(s.max, ref.max);
      ASSERT_EQ(s.mean, ref.sum / static_cast<double>(ref.count));
    }
  }
}

TEST(RasterFormat, ParsesAndRoundTrips) {
  const BandRaster r = parse_raster(kSmallRaster);
  EXPECT_EQ(r.width, 2);
  EXPECT_EQ(r.cell_size, 10);
  EXPECT_EQ(r.origin, (Point{100, 200}));
  EXPECT_TRUE(is_nodata(r.band("RED").at(0, 1)));
  EXPECT_EQ(r.band("NIR").at(1, 0), 0.5);
  ASSERT_EQ(r.parcels.size(), 1u);
  EXPECT_EQ(r.parcels[0].name, "North block");
  const std::string text = serialize_raster(r);
  EXPECT_EQ(serialize_raster(parse_raster(text)), text);
}

TEST(RasterFormat, DiagnosticsCarryLineNumbers) {
  std::string bad = kSmallRaster;
  bad.replace(bad.find("0.4 0.5"), 7, "0.4");
  try {
    parse_raster(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSyntax);
    EXPECT_NE(std::string(e.what()).find("line 13"), std::string::npos) << e.what();
  }
}

TEST(RasterFormat, RejectsOutOfRangeReflectanceAndBowTieParcels) {
  std::string bad = kSmallRaster;
  bad.replace(bad.find("0.2 0.1"), 7, "1.2 0.1");
  bad.replace(bad.find("100 200 120 200 120 210 100 210"), 31, "100 200 120 210 120 200 100 210");
  try {
    parse_raster(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    ASSERT_EQ(e.details().size(), 3u);  // reflectance, zero net area, crossing edges
    EXPECT_NE(e.details()[2].find("intersect"), std::string::npos);
  }
}

TEST(Render, AllNoDataIsUniformGray) {
  BandRaster r = uniform(3, 3, 0, 0);
  const Grid g = compute_index(r, IndexKind::kNdvi);
  const RenderedMap m = render_color_map(r, g, IndexKind::kNdvi);
  for (const Rgb& p : m.image.pixels) EXPECT_EQ(p, kNoDataColor);
}

TEST(Render, ConstantPointSixIsClassFourWithOutline) {
  BandRaster r = uniform(6, 6, 0.8, 0.2);
  r.parcels.push_back(square("P", 1, 1, 5, 5));
  const Grid g(6, 6, 0.6);
  const RenderedMap m = render_color_map(r, g, IndexKind::kNdvi, RenderMode::kParcel, 2);
  EXPECT_EQ(m.image.width, 12);
  const Rgb class4 = legend_classes()[3].color;
  EXPECT_EQ(m.image.at(0, 0), class4);                 // outside the parcel
  EXPECT_EQ(m.image.at(2, 2), kOutlineColor);          // cell (1,1): parcel edge
  EXPECT_EQ(m.image.at(5, 5), class4);                 // cell (2,2): interior
  EXPECT_EQ(m.legend["parcels"][0]["class"], 4);
  EXPECT_EQ(m.legend["classes"].size(), 5u);
  const std::string ppm = encode_ppm(m.image);
  EXPECT_EQ(ppm.substr(0, 11), "P6\n12 12\n25");
  EXPECT_EQ(ppm.size(), std::string("P6\n12 12\n255\n").size() + 12 * 12 * 3);
}

TEST(Render, AdjacentParcelsWithDifferentMeansDiffer) {
  BandRaster r;
  r.width = 8;
  r.height = 4;
  Grid nir(8, 4), red(8, 4);
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 8; ++col) {
      red.at(col, row) = 0.1;
      nir.at(col, row) = col < 4 ? 0.15 : 0.5666666666666667;  // NDVI 0.2 and 0.7
    }
  }
  r.bands.emplace("NIR", nir);
  r.bands.emplace("RED", red);
  r.parcels.push_back(square("W", 0, 0, 4, 4));
  r.parcels.push_back(square("E", 4, 0, 8, 4));
  const Grid g = compute_index(r, IndexKind::kNdvi);
  const RenderedMap m = render_color_map(r, g, IndexKind::kNdvi);
  EXPECT_EQ(m.legend["parcels"][0]["class"], 3);
  EXPECT_EQ(m.legend["parcels"][1]["class"], 5);
  EXPECT_EQ(m.image.at(3, 1), kOutlineColor);  // shared boundary
  EXPECT_EQ(m.image.at(4, 1), kOutlineColor);
  EXPECT_NE(m.image.at(1, 1), m.image.at(6, 1));
}
