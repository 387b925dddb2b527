#include <random>

#include <benchmark/benchmark.h>

#include "sego/autodiff.hpp"
#include "sego/coding_tree.hpp"
#include "sego/detector.hpp"
#include "sego/generators.hpp"
#include "sego/views.hpp"

namespace {

using namespace sego;

Graph sample_graph(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_connected_graph(n, 8.0 / n, rng);
}

void BM_BuildCodingTree(benchmark::State& state) {
  const Graph g = sample_graph(static_cast<int>(state.range(0)), 1);
  const int k = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(build_coding_tree(g, k));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildCodingTree)->ArgsProduct({{16, 32, 64, 128}, {2, 3, 5}})->Complexity();

void BM_RandomWalkEncoding(benchmark::State& state) {
  const Graph g = sample_graph(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(random_walk_encoding(g, 16));
}
BENCHMARK(BM_RandomWalkEncoding)->Arg(16)->Arg(64)->Arg(256);

template <bool Symmetric>
void BM_InfoNce(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  ad::Parameter a("a", Matrix(n, 16)), b("b", Matrix(n, 16));
  for (Eigen::Index i = 0; i < a.value.size(); ++i) {
    a.value.data()[i] = normal(rng);
    b.value.data()[i] = normal(rng);
  }
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    ad::Tape tape;
    const ad::Tensor pa = tape.parameter(a), pb = tape.parameter(b);
    const ad::Tensor rows = Symmetric ? ad::info_nce_symmetric_rows(pa, pb, 0.2)
                                      : ad::add(ad::info_nce_rows(pa, pb, 0.2), ad::info_nce_rows(pb, pa, 0.2));
    tape.backward(ad::mean(rows));
    benchmark::ClobberMemory();
  }
}
// Both directions, forward + backward; node-level batches reach a few thousand rows.
BENCHMARK(BM_InfoNce<false>)->Name("BM_InfoNceTwoCalls")->Arg(128)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InfoNce<true>)->Name("BM_InfoNceSymmetric")->Arg(128)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

// One epoch over 64 graphs of 12-24 nodes: views, forward, backward, Adam.
void BM_TrainEpoch(benchmark::State& state) {
  Dataset data{"bench", {}, 1};
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(12, 24);
  for (int i = 0; i < 64; ++i) {
    const Graph g = random_connected_graph(size(rng), 0.25, rng);
    data.graphs.emplace_back(g.node_count(), g.edges(), Matrix::Ones(g.node_count(), 1));
  }
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.k = 3;
  const auto prepared = prepare_graphs(data, cfg.k, cfg.r);
  for (auto _ : state) benchmark::DoNotOptimize(train(prepared, cfg));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
