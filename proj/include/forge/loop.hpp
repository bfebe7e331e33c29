#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/providers.hpp"
#include "forge/repository.hpp"

namespace forge {

struct LoopBudgets {
    std::uint64_t max_calls = 1000000;
    std::uint64_t max_candidates = 1000000;
};

struct IterationRecord {
    int iteration = 0;
    std::string query;
    std::string operator_id;
    int generated = 0;
    int kept = 0;
    int rejected = 0;
    std::vector<NodeId> written;
    std::size_t nodes_total = 0;
    std::uint64_t calls_used = 0;
};

struct LoopReport {
    std::vector<IterationRecord> iterations;
    std::uint64_t candidates_generated = 0;
    std::uint64_t nodes_written = 0;
    std::uint64_t calls_used = 0;
    std::string halt_reason;  // completed | call budget exhausted | candidate budget exhausted
};

// Retrieve -> synthesize -> score -> verify -> write back, `iterations` times.
// Each round aims the query at the weakest pair of top-level clusters (the
// least cross-cluster contribution weight, ties toward smaller ids). Provider
// calls are metered at this level: one embed for the query, one generation,
// one score per candidate, one verification per kept candidate; crossing
// either budget halts cleanly before the next call.
LoopReport run_loop(Repository& repo, int iterations, const LoopBudgets& budgets,
                    Providers& providers);

} // namespace forge
