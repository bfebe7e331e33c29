#include "forge/funnel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "forge/util.hpp"

namespace forge {

int funnel_budget(int k1, double eta, int step) {
    if (k1 < 1) throw ValidationError("funnel budget k1 must be positive");
    if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("funnel decay must lie in (0,1)");
    if (step < 1) throw ValidationError("funnel step starts at 1");
    double raw = k1 * std::pow(eta, static_cast<double>(step - 1));
    return std::max(1, static_cast<int>(std::ceil(raw)));
}

RetrievalContext funnel_retrieve(const AbstractionTree& tree,
                                 const SimilarityIndex& cluster_index,
                                 const SimilarityIndex& leaf_index,
                                 const std::string& query_text, const Vec& query,
                                 const FunnelParams& params) {
    if (tree.empty() || tree.leaf_count() == 0)
        throw NotFoundError("funnel over an empty abstraction tree");
    if (params.k_leaf && *params.k_leaf < 1)
        throw ValidationError("leaf budget must be positive");

    RetrievalContext ctx;
    ctx.query_text = query_text;
    ctx.query_embedding = query;

    int levels = tree.level_count();
    std::vector<std::uint64_t> pool(tree.top_level().begin(), tree.top_level().end());
    std::sort(pool.begin(), pool.end());

    int step = 1;
    std::vector<ClusterId> selected;
    for (int lvl = levels; lvl >= 1; --lvl, ++step) {
        int k = funnel_budget(params.k1, params.eta, step);
        auto ranked = cluster_index.top_k(query, pool, static_cast<std::size_t>(k));
        TraceStep ts;
        ts.level = lvl;
        ts.pool = pool;
        ts.selected = ranked;
        ctx.trace.push_back(std::move(ts));

        selected.clear();
        for (const auto& [id, sim] : ranked) selected.push_back(id);

        pool.clear();
        for (ClusterId cid : selected) {
            const ClusterNode& node = tree.cluster(cid);
            pool.insert(pool.end(), node.children.begin(), node.children.end());
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    }

    // `pool` now holds the leaves under the selected level-1 clusters.
    int k_final = params.k_leaf ? *params.k_leaf : funnel_budget(params.k1, params.eta, step);
    auto ranked = leaf_index.top_k(query, pool, static_cast<std::size_t>(k_final));
    TraceStep ts;
    ts.level = 0;
    ts.pool = pool;
    ts.selected = ranked;
    ctx.trace.push_back(std::move(ts));

    ctx.leaves.assign(ranked.begin(), ranked.end());
    return ctx;
}

CostReport cost_report(const std::vector<TraceStep>& trace, int k1, double eta) {
    if (trace.empty()) throw ValidationError("cost report needs a non-empty trace");
    if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("funnel decay must lie in (0,1)");
    CostReport report;
    int step = 1;
    for (const auto& ts : trace) {
        LevelCost cost;
        cost.level = ts.level;
        cost.pool = ts.pool.size();
        cost.selected = ts.selected.size();
        cost.budget = funnel_budget(k1, eta, step);
        report.total_comparisons += cost.pool;
        report.total_selected += cost.selected;
        report.total_budget += static_cast<std::size_t>(cost.budget);
        report.steps.push_back(cost);
        ++step;
    }
    double s = static_cast<double>(trace.size());
    report.analytic_bound = k1 * (1.0 - std::pow(eta, s)) / (1.0 - eta) + s;
    return report;
}

std::string trace_to_text(const std::vector<TraceStep>& trace) {
    std::ostringstream out;
    for (const auto& ts : trace) {
        out << "level=" << (ts.level == 0 ? std::string("leaf") : std::to_string(ts.level))
            << " pool=" << ts.pool.size() << " selected=";
        for (std::size_t i = 0; i < ts.selected.size(); ++i) {
            if (i) out << ',';
            out << (ts.level == 0 ? 'm' : 'c') << ts.selected[i].first << ':'
                << format_fixed(ts.selected[i].second, 6);
        }
        out << '\n';
    }
    return out.str();
}

} // namespace forge
