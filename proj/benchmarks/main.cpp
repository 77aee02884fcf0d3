#include <benchmark/benchmark.h>

// The distro's benchmark_main archive carries LTO bytecode from another GCC.
BENCHMARK_MAIN();
