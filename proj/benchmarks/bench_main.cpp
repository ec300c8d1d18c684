#include <random>

#include <benchmark/benchmark.h>

#include "cotalk/dedup.hpp"
#include "cotalk/embedding.hpp"
#include "cotalk/semantic_model.hpp"
#include "cotalk/sim.hpp"

using namespace cotalk;
using semantic::AttributeKind;
using semantic::SemanticUnit;

namespace {

std::vector<SemanticUnit> units(std::uint64_t seed, int count) {
  static const char* objects[] = {"car", "tree", "house", "dog", "bench", "bird", "boat", "lamp"};
  static const char* values[] = {"black", "red", "white", "green", "two", "large", "left", "wooden"};
  std::mt19937_64 rng(seed);
  std::vector<SemanticUnit> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(SemanticUnit::make(objects[rng() % 8], static_cast<AttributeKind>(rng() % 8), values[rng() % 8]));
  }
  return out;
}

void BM_BuildTree(benchmark::State& state) {
  auto u = units(1, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(semantic::build_tree(u));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildTree)->Range(8, 512);

void BM_MatchExact(benchmark::State& state) {
  auto a = semantic::build_tree(units(2, static_cast<int>(state.range(0)))).units();
  auto b = semantic::build_tree(units(3, static_cast<int>(state.range(0)))).units();
  auto m = metrics::DuplicationMatcher::exact();
  for (auto _ : state) benchmark::DoNotOptimize(metrics::match_units(a, b, m));
}
BENCHMARK(BM_MatchExact)->Range(8, 256);

void BM_MatchEmbedding(benchmark::State& state) {
  auto a = semantic::build_tree(units(4, static_cast<int>(state.range(0)))).units();
  auto b = semantic::build_tree(units(5, static_cast<int>(state.range(0)))).units();
  auto m = metrics::DuplicationMatcher::embedding(std::make_shared<metrics::HashEmbeddingProvider>(), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::match_units(a, b, m));
}
BENCHMARK(BM_MatchEmbedding)->Range(8, 128);

void BM_SimulateTrials(benchmark::State& state) {
  auto s = sim::SimScenario::calibrated();
  auto strategy = state.range(0) == 0 ? sim::Strategy::cotalk(2) : sim::Strategy::parallel(2);
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_trials(s, strategy, 1000));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SimulateTrials)->Arg(0)->Arg(1);

}  // namespace
BENCHMARK_MAIN();
