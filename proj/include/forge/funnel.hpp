#pragma once

#include <optional>
#include <string>
#include <vector>

#include "forge/abstraction.hpp"
#include "forge/core.hpp"
#include "forge/embed.hpp"

namespace forge {

// Geometric beam budget for descent step `step` (1 = top of the tree):
// max(1, ceil(k1 * eta^(step-1))).
int funnel_budget(int k1, double eta, int step);

struct FunnelParams {
    int k1 = 8;
    double eta = 0.5;
    std::optional<int> k_leaf;  // leaf-stage budget; default: next step's budget
};

// Descends the abstraction tree top-down. Step 1 ranks the root clusters;
// each later step ranks only the children of the clusters selected above it
// (beam semantics); the leaf stage ranks the leaves under the selected
// level-1 clusters. Every ranking is an exact scan of its pool, so the
// index comparison counters measure funnel cost directly.
RetrievalContext funnel_retrieve(const AbstractionTree& tree,
                                 const SimilarityIndex& cluster_index,
                                 const SimilarityIndex& leaf_index,
                                 const std::string& query_text, const Vec& query,
                                 const FunnelParams& params);

struct LevelCost {
    int level = 0;             // cluster level; 0 = leaf stage
    std::size_t pool = 0;      // comparisons at this step in exact mode
    std::size_t selected = 0;
    int budget = 0;
};

struct CostReport {
    std::vector<LevelCost> steps;
    std::size_t total_comparisons = 0;
    std::size_t total_selected = 0;
    std::size_t total_budget = 0;
    double analytic_bound = 0.0;  // k1 * (1 - eta^S) / (1 - eta) + S over S steps
};

CostReport cost_report(const std::vector<TraceStep>& trace, int k1, double eta);

// One line per step: "level=<l> pool=<n> selected=id:sim,id:sim".
std::string trace_to_text(const std::vector<TraceStep>& trace);

} // namespace forge
