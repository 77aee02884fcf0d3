#include "sae/checker.hpp"
#include "sae/model.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

std::string numbers(std::size_t count, unsigned seed, double jitter) {
    std::mt19937 rng(seed);
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        out += std::to_string((rng() % 100000) / 64.0 + jitter);
        out += (i % 16 == 15) ? '\n' : ' ';
    }
    return out;
}

void BM_TokenCompare(benchmark::State& state) {
    auto a = numbers(static_cast<std::size_t>(state.range(0)), 1, 0);
    auto b = a;
    sae::CheckerPolicy p;
    for (auto _ : state) benchmark::DoNotOptimize(sae::check_output(a, b, p));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * a.size()));
}
BENCHMARK(BM_TokenCompare)->Range(64, 1 << 16);

void BM_NumericCompare(benchmark::State& state) {
    auto a = numbers(static_cast<std::size_t>(state.range(0)), 1, 0);
    auto b = numbers(static_cast<std::size_t>(state.range(0)), 1, 1e-7);
    sae::CheckerPolicy p;
    p.kind = sae::CheckerKind::numeric_token;
    p.numeric_epsilon = 1e-6;
    for (auto _ : state) benchmark::DoNotOptimize(sae::check_output(a, b, p));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * a.size()));
}
BENCHMARK(BM_NumericCompare)->Range(64, 1 << 16);

void BM_AggregateScore(benchmark::State& state) {
    std::mt19937 rng(3);
    std::vector<sae::ScoredCase> cases;
    for (int i = 0; i < state.range(0); ++i)
        cases.push_back({rng() % 3 ? sae::Verdict::pass : sae::Verdict::wrong_output,
                         sae::Weight{static_cast<std::int64_t>(1 + rng() % 5), static_cast<std::int64_t>(1 + rng() % 7)}});
    for (auto _ : state) benchmark::DoNotOptimize(sae::aggregate_score(cases, 100));
}
BENCHMARK(BM_AggregateScore)->Range(4, 1024);

}  // namespace
