#include <benchmark/benchmark.h>

#include <filesystem>

#include "agriflow/store/journal.hpp"

using namespace agriflow;

namespace {

store::EventRecord sample() {
  store::EventRecord r;
  r.instance_id = "inst-000042";
  r.kind = store::EventKind::kVariableSet;
  r.payload = {{"name", "t_max"}, {"value", 36.2}};
  return r;
}

void BM_EncodeDecodeRecord(benchmark::State& state) {
  const auto r = sample();
  for (auto _ : state) benchmark::DoNotOptimize(store::decode_record(store::encode_record(r)));
}
BENCHMARK(BM_EncodeDecodeRecord);

// Without fsync; the synced figure is dominated by the disk.
void BM_FileAppend(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "agriflow-bench-append.log";
  std::filesystem::remove(path);
  auto j = store::Journal::open(path, false);
  for (auto _ : state) benchmark::DoNotOptimize(j.append(sample()));
  std::filesystem::remove(path);
}
BENCHMARK(BM_FileAppend);

}  // namespace
