#include "sae/store.hpp"
#include "sae/tar.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <cstring>

namespace {

std::filesystem::path scratch(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / (std::string("sae-bench-") + name);
    std::filesystem::remove_all(dir);
    return dir;
}

void BM_BlobPut(benchmark::State& state) {
    auto dir = scratch("blobs");
    sae::BlobStore blobs(dir);
    std::string data(static_cast<std::size_t>(state.range(0)), 'x');
    std::uint64_t i = 0;
    for (auto _ : state) {
        std::memcpy(data.data(), &i, sizeof i);  // fresh content each time
        ++i;
        benchmark::DoNotOptimize(blobs.put(data));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * data.size()));
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_BlobPut)->Arg(1 << 10)->Arg(1 << 16)->Arg(1 << 20);

void BM_CreateSubmission(benchmark::State& state) {
    auto dir = scratch("store");
    sae::Store store(dir);
    std::map<std::string, std::string> files;
    for (int s = 0; s < 5; ++s) files["slot" + std::to_string(s)] = std::string(2048, static_cast<char>('a' + s));
    for (auto _ : state) benchmark::DoNotOptimize(store.create_submission("u", "t", files, "python3"));
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_CreateSubmission)->Unit(benchmark::kMicrosecond);

void BM_TarRoundTrip(benchmark::State& state) {
    std::vector<sae::TarEntry> entries;
    for (int i = 0; i < state.range(0); ++i) entries.push_back({"f" + std::to_string(i) + ".py", std::string(4000, 'y')});
    for (auto _ : state) benchmark::DoNotOptimize(sae::read_tar(sae::write_tar(entries)));
}
BENCHMARK(BM_TarRoundTrip)->Arg(5)->Arg(100);

}  // namespace
