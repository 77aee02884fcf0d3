#include "sae/scheduler.hpp"

#include <benchmark/benchmark.h>

namespace {

// Enqueue N jobs, then drain them through W workers.
void BM_EnqueueClaimComplete(benchmark::State& state) {
    const int jobs = static_cast<int>(state.range(0));
    const int workers = static_cast<int>(state.range(1));
    sae::EvaluationReport report;
    for (auto _ : state) {
        sae::Scheduler sched;
        for (int w = 0; w < workers; ++w) sched.register_worker("w" + std::to_string(w));
        for (int i = 0; i < jobs; ++i) sched.enqueue("s" + std::to_string(i));
        for (int done = 0; done < jobs;) {
            for (int w = 0; w < workers && done < jobs; ++w) {
                auto id = "w" + std::to_string(w);
                if (auto job = sched.claim_next(id)) {
                    sched.complete(job->job_id, id, report);
                    ++done;
                }
            }
        }
    }
    state.SetItemsProcessed(state.iterations() * jobs);
}
BENCHMARK(BM_EnqueueClaimComplete)->Args({100, 4})->Args({1000, 4})->Args({1000, 32});

// Claims that must skip jobs pinned to another pool.
void BM_ClaimWithAffinity(benchmark::State& state) {
    const int jobs = static_cast<int>(state.range(0));
    sae::EvaluationReport report;
    for (auto _ : state) {
        sae::Scheduler sched;
        sched.register_worker("plain");
        for (int i = 0; i < jobs; ++i) sched.enqueue("s" + std::to_string(i), i % 2 ? "gpu" : "");
        while (auto job = sched.claim_next("plain")) sched.complete(job->job_id, "plain", report);
    }
    state.SetItemsProcessed(state.iterations() * jobs / 2);
}
BENCHMARK(BM_ClaimWithAffinity)->Arg(100)->Arg(1000);

}  // namespace
