#include <benchmark/benchmark.h>

#include <random>

#include "relrec/eval.hpp"
#include "relrec/recall.hpp"
#include "relrec/relational.hpp"
#include "relrec/training.hpp"

using namespace relrec;

namespace {

ModelParams random_params(std::size_t vocab, std::size_t d, std::size_t n_rel) {
    ModelParams p = ModelParams::zeros({d, d, d, n_rel}, vocab);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& t : p.tensors)
        for (auto& x : t.flat()) x = n(rng);
    return p;
}

const SyntheticWorld& world() {
    static const SyntheticWorld w = [] {
        SyntheticSpec s;
        s.n_entities = 1000;
        s.n_clusters = 10;
        return generate_synthetic(s);
    }();
    return w;
}

}  // namespace

static void BM_ComputePpmi(benchmark::State& state) {
    const auto& g = world().graph;
    for (auto _ : state) benchmark::DoNotOptimize(compute_ppmi(g));
    state.counters["edges"] = static_cast<double>(g.edges.size());
}
BENCHMARK(BM_ComputePpmi)->Unit(benchmark::kMillisecond);

// Full-softmax recall loss with gradients; cost grows with |V|·d per entity.
static void BM_RecallLoss(benchmark::State& state) {
    const auto vocab = static_cast<std::size_t>(state.range(0));
    const auto p = random_params(vocab, 64, 1);
    std::vector<std::optional<EmpiricalDist>> emp(vocab);
    std::vector<EntityId> batch;
    for (EntityId e = 0; e < 32; ++e) {
        emp[e] = EmpiricalDist{{{(e + 1) % vocab, 0.6}, {(e + 2) % vocab, 0.4}}};
        batch.push_back(e);
    }
    GradSet g(p);
    for (auto _ : state) {
        g.clear();
        benchmark::DoNotOptimize(recall_loss(p, emp, batch, &g));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_RecallLoss)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_RelationalLoss(benchmark::State& state) {
    const auto p = random_params(1000, 64, 4);
    std::vector<Triple> batch;
    for (EntityId i = 0; i < 64; ++i) batch.push_back({i, i % 4, (i * 7 + 3) % 1000});
    GradSet g(p);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        g.clear();
        benchmark::DoNotOptimize(
            relational_loss(p, batch, static_cast<std::size_t>(state.range(0)), ++seed, &g));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_RelationalLoss)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

// One prediction with N_h = N_t = n_c, i.e. n_c² assumption pairs.
static void BM_PredictRelation(benchmark::State& state) {
    const auto p = random_params(1000, 64, 4);
    PredictOptions opts;
    opts.n_h = opts.n_t = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(predict_relation(p, 1, 2, opts));
}
BENCHMARK(BM_PredictRelation)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_PredictionBackprop(benchmark::State& state) {
    const auto p = random_params(1000, 64, 4);
    PredictOptions opts;
    opts.n_h = opts.n_t = 16;
    const std::vector<LabeledPair> batch{{1, 2, 1, 0}, {3, 4, 0, 0}, {5, 6, 1, 0}, {7, 8, 0, 0}};
    GradSet g(p);
    for (auto _ : state) {
        g.clear();
        benchmark::DoNotOptimize(prediction_loss(p, batch, opts, &g));
    }
}
BENCHMARK(BM_PredictionBackprop)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
