#include <benchmark/benchmark.h>

#include <vector>

#include "subsel/evaluate.hpp"
#include "subsel/group_agg.hpp"
#include "subsel/partition.hpp"
#include "subsel/pvalues.hpp"
#include "subsel/screening.hpp"
#include "subsel/simulate.hpp"
#include "subsel/unit_stats.hpp"

namespace {

struct Fixture {
  std::vector<subsel::MatchedSet> sets;
  subsel::Partition partition;
  std::vector<subsel::UnitStats> units;
  std::vector<subsel::GroupStats> groups;
  subsel::GroupFeatures features;
};

Fixture make_fixture(int n_sets, int group_size, int set_size) {
  Fixture f;
  subsel::SimConfig cfg;
  cfg.n_sets = n_sets;
  cfg.set_size = set_size;
  cfg.seed = 7;
  subsel::SimData data = subsel::gen_dataset(cfg);
  f.sets = std::move(data.sets);
  int k = std::max(2, n_sets / group_size);
  subsel::RngStream rng = subsel::substream(7, "partition");
  f.partition = subsel::random_partition(data.important, k, 0.3, rng);
  subsel::UnitStatsOptions opt;
  opt.variant = subsel::Magnitude::Np;
  f.units = subsel::compute_unit_stats(f.sets, opt, 7);
  f.groups = subsel::aggregate_groups(f.units, f.partition, 3.0, subsel::Magnitude::Np);
  f.features = subsel::build_features(f.sets, f.partition, f.groups);
  return f;
}

void bm_unit_stats(benchmark::State& state) {
  subsel::SimConfig cfg;
  cfg.n_sets = 1200;
  cfg.set_size = 4;
  cfg.seed = 7;
  subsel::SimData data = subsel::gen_dataset(cfg);
  subsel::UnitStatsOptions opt;
  opt.variant = subsel::Magnitude::Np;
  for (auto _ : state) {
    auto units = subsel::compute_unit_stats(data.sets, opt, 7);
    benchmark::DoNotOptimize(units);
  }
}
BENCHMARK(bm_unit_stats)->Unit(benchmark::kMillisecond);

void bm_aggregate(benchmark::State& state) {
  Fixture f = make_fixture(1200, 5, 4);
  for (auto _ : state) {
    auto groups = subsel::aggregate_groups(f.units, f.partition, 3.0, subsel::Magnitude::Np);
    benchmark::DoNotOptimize(groups);
  }
}
BENCHMARK(bm_aggregate)->Unit(benchmark::kMillisecond);

void bm_screen(benchmark::State& state) {
  Fixture f = make_fixture(static_cast<int>(state.range(0)), 5, 4);
  subsel::ScreeningConfig cfg;
  cfg.alpha = 0.1;
  cfg.seed = 7;
  for (auto _ : state) {
    auto result = subsel::screen(f.groups, f.features, cfg);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_screen)->Arg(600)->Arg(1200)->Unit(benchmark::kMillisecond);

void bm_signed_rank_exact(benchmark::State& state) {
  int m = static_cast<int>(state.range(0));
  std::vector<int> signs(m);
  std::vector<double> weights(m);
  for (int i = 0; i < m; ++i) {
    signs[i] = i % 3 == 0 ? -1 : 1;
    weights[i] = i + 1;
  }
  for (auto _ : state) {
    auto p = subsel::signed_rank_sensitivity_pvalue(signs, weights, 2.0, false, nullptr);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(bm_signed_rank_exact)->Arg(12)->Arg(20);

void bm_select_np(benchmark::State& state) {
  Fixture f = make_fixture(1000, 5, 4);
  subsel::SelectOptions opt;
  opt.method = subsel::Method::Np;
  opt.gamma = 3.0;
  opt.seed = 7;
  for (auto _ : state) {
    auto out = subsel::run_select(f.sets, f.partition, opt);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(bm_select_np)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
