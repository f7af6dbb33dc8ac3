#include <benchmark/benchmark.h>

#include "osheda/bounds.hpp"
#include "osheda/losses.hpp"
#include "osheda/network.hpp"
#include "osheda/pseudo.hpp"
#include "osheda/synthetic.hpp"
#include "osheda/trainer.hpp"

using namespace osheda;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

void BM_forward_backward(benchmark::State& state) {
    const std::size_t dim = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Network net = build_representation_mapping(dim, 64);
    initialize_params(net, rng);
    const Matrix batch = random_matrix(rng, 64, dim);
    const Matrix upstream = random_matrix(rng, 64, 64);
    for (auto _ : state) {
        ForwardTrace trace;
        Matrix out = forward(net, batch, &trace);
        benchmark::DoNotOptimize(out);
        Matrix din = backward(net, trace, upstream);
        benchmark::DoNotOptimize(din);
        zero_grads(net);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_forward_backward)->Arg(20)->Arg(128)->Arg(512);

void BM_pseudo_label(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const Matrix logits = random_matrix(rng, n, 8);
    for (auto _ : state) {
        auto labels = assign_pseudo_labels(logits, 0.7, 7);
        benchmark::DoNotOptimize(labels);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_pseudo_label)->Arg(64)->Arg(2048);

void BM_estimate_js(benchmark::State& state) {
    Rng rng(3);
    const Matrix a = random_matrix(rng, 1000, 16);
    Matrix b = random_matrix(rng, 1000, 16);
    for (std::size_t r = 0; r < b.rows(); ++r) b.at(r, 0) += 1.0;
    for (auto _ : state) {
        const double js = estimate_js(a, b, 32, 7);
        benchmark::DoNotOptimize(js);
    }
}
BENCHMARK(BM_estimate_js);

void BM_train_epoch(benchmark::State& state) {
    SyntheticConfig task;
    task.n_source = 512;
    task.n_target_unlabeled = 512;
    task.seed = 4;
    const SyntheticBundle b = generate_synthetic(task);
    TrainConfig cfg;
    cfg.lambda = 2.0 / 3.0;
    cfg.epochs = 1;
    cfg.stage_threshold = 1;
    cfg.two_stage = false; // full stage-2 objective
    cfg.batch_target_labeled = 20;
    cfg.repr_dim = 64;
    for (auto _ : state) {
        TrainedModel m = train_rl_osheda(b.source, b.target_labeled, b.target_unlabeled, cfg);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(BM_train_epoch)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
