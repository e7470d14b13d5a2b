#include <benchmark/benchmark.h>

#include <random>

#include "agriflow/geo/index.hpp"
#include "agriflow/geo/render.hpp"
#include "geo_oracles.hpp"

using namespace agriflow;

namespace {

geo::BandRaster raster(int side) {
  std::mt19937_64 rng(5);
  geo::BandRaster r = testkit::random_raster(rng, side, side);
  const double s = side;
  r.parcels = {{"W", "west", {{0, 0}, {s / 2, 0}, {s / 2, s}, {0, s}}}, {"E", "east", {{s / 2, 0}, {s, 0}, {s, s}, {s / 2, s}}}};
  return r;
}

void BM_ComputeNdvi(benchmark::State& state) {
  const auto r = raster(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(geo::compute_index(r, geo::IndexKind::kNdvi));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_ComputeNdvi)->Arg(24)->Arg(256)->Arg(1024);

void BM_ZonalStats(benchmark::State& state) {
  const auto r = raster(static_cast<int>(state.range(0)));
  const auto g = geo::compute_index(r, geo::IndexKind::kNdvi);
  for (auto _ : state) benchmark::DoNotOptimize(geo::zonal_stats(r, g, r.parcels[0]));
}
BENCHMARK(BM_ZonalStats)->Arg(24)->Arg(256);

void BM_RenderParcelMap(benchmark::State& state) {
  const auto r = raster(static_cast<int>(state.range(0)));
  const auto g = geo::compute_index(r, geo::IndexKind::kOsavi);
  for (auto _ : state) benchmark::DoNotOptimize(geo::render_color_map(r, g, geo::IndexKind::kOsavi));
}
BENCHMARK(BM_RenderParcelMap)->Arg(24)->Arg(256);

}  // namespace
