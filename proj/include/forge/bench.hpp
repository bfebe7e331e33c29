#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/funnel.hpp"

namespace forge {

struct BenchRow {
    std::size_t leaves = 0;
    std::size_t clusters = 0;
    int queries = 0;
    std::uint64_t funnel_comparisons = 0;  // summed over the queries
    std::uint64_t flat_comparisons = 0;
    double speedup = 0.0;                  // flat / funnel
    std::size_t max_selected = 0;          // largest per-step selection seen
    bool budgets_respected = true;         // every step selected <= its budget
};

struct BenchOptions {
    std::vector<std::size_t> sizes{256, 512, 1024};
    int queries = 20;
    int dimension = 32;
    int levels = 3;
    std::uint64_t seed = 1;
    FunnelParams funnel;
};

// Synthetic retrieval cost benchmark: leaves spread over hashed topic
// directions, a derived cluster schedule per size, identical queries against
// the funnel and a flat scan. Costs come straight from the comparison counters.
std::vector<BenchRow> run_bench(const BenchOptions& opts);

std::string bench_table(const std::vector<BenchRow>& rows);

} // namespace forge
