#include "forge/bench.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "forge/abstraction.hpp"
#include "forge/util.hpp"

namespace forge {

namespace {

// Topic markers whose feature-hash buckets never collide, so each topic spans
// its own direction and the level-1 clusters come out balanced.
std::vector<std::string> topic_tokens(std::size_t topics, int dim) {
    std::vector<std::string> out;
    std::set<std::uint64_t> used;
    for (std::size_t t = 0; t < topics; ++t) {
        for (std::size_t salt = 0;; ++salt) {
            std::string tok = "t" + std::to_string(t) + "x" + std::to_string(salt);
            if (used.insert(fnv1a64(tok) % static_cast<std::uint64_t>(dim)).second) {
                out.push_back(std::move(tok));
                break;
            }
        }
    }
    return out;
}

} // namespace

std::vector<BenchRow> run_bench(const BenchOptions& opts) {
    if (opts.sizes.empty()) throw ValidationError("bench needs at least one corpus size");
    if (opts.queries < 1) throw ValidationError("bench needs at least one query");
    if (opts.dimension < 2) throw ValidationError("bench dimension must be at least 2");
    if (opts.levels < 1) throw ValidationError("bench levels must be at least 1");

    StubEmbedder embedder(opts.dimension);
    StubSummarizer summarizer;
    std::vector<BenchRow> rows;

    for (std::size_t n0 : opts.sizes) {
        // Balanced topical corpus: sqrt(N) topics so level-1 clusters recover
        // near-uniform groups and the leaf-stage pool tracks its expectation.
        std::size_t topics =
            static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n0))));
        if (topics * 2 > static_cast<std::size_t>(opts.dimension)) {
            throw ValidationError("bench dimension too small for the corpus sizes");
        }
        std::vector<std::string> marks = topic_tokens(topics, opts.dimension);

        // Same-topic leaves share one direction exactly; the D^2 seeding then
        // covers every topic once and level-1 sizes stay within one of N/K1.
        std::vector<MethodNode> leaves(n0);
        for (std::size_t i = 0; i < n0; ++i) {
            MethodNode& m = leaves[i];
            const std::string& topic = marks[i % topics];
            m.id = i + 1;
            m.name = "m" + std::to_string(i + 1);
            m.summary = topic;
            m.keywords = {topic};
            m.embedding = embedder.embed(topic);
        }

        ClusterSchedule schedule = make_schedule(n0, opts.levels, 0, 0, 1);
        AbstractionTree tree =
            AbstractionTree::build(leaves, schedule, opts.seed, summarizer, embedder);

        SimilarityIndex cluster_index;
        SimilarityIndex leaf_index;
        for (const ClusterNode* c : tree.all_clusters()) {
            cluster_index.add(c->id, c->summary_embedding);
        }
        for (const auto& leaf : leaves) {
            leaf_index.add(leaf.id, leaf.embedding);
        }
        cluster_index.build(opts.seed);
        leaf_index.build(opts.seed);

        BenchRow row;
        row.leaves = n0;
        row.clusters = tree.cluster_count();
        row.queries = opts.queries;

        for (int q = 0; q < opts.queries; ++q) {
            const std::string& text = marks[static_cast<std::size_t>(q) % topics];
            Vec query = embedder.embed(text);

            cluster_index.reset_comparisons();
            leaf_index.reset_comparisons();
            RetrievalContext ctx =
                funnel_retrieve(tree, cluster_index, leaf_index, text, query, opts.funnel);
            row.funnel_comparisons += cluster_index.comparisons() + leaf_index.comparisons();

            CostReport cost = cost_report(ctx.trace, opts.funnel.k1, opts.funnel.eta);
            for (const auto& step : cost.steps) {
                row.max_selected = std::max(row.max_selected, step.selected);
                if (step.selected > static_cast<std::size_t>(step.budget)) {
                    row.budgets_respected = false;
                }
            }

            leaf_index.reset_comparisons();
            (void)leaf_index.top_k(query, static_cast<std::size_t>(opts.funnel.k1));
            row.flat_comparisons += leaf_index.comparisons();
        }

        row.speedup = row.funnel_comparisons == 0
                          ? 0.0
                          : static_cast<double>(row.flat_comparisons) /
                                static_cast<double>(row.funnel_comparisons);
        rows.push_back(row);
    }
    return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "leaves" << std::setw(10) << "clusters" << std::setw(9)
        << "queries" << std::setw(10) << "funnel" << std::setw(10) << "flat" << std::setw(10)
        << "speedup" << std::setw(8) << "growth"
        << "budgets\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const BenchRow& r = rows[i];
        std::string growth = "-";
        if (i > 0 && rows[i - 1].funnel_comparisons > 0) {
            growth = format_fixed(static_cast<double>(r.funnel_comparisons) /
                                      static_cast<double>(rows[i - 1].funnel_comparisons),
                                  3);
        }
        out << std::left << std::setw(8) << r.leaves << std::setw(10) << r.clusters << std::setw(9)
            << r.queries << std::setw(10) << r.funnel_comparisons << std::setw(10)
            << r.flat_comparisons << std::setw(10) << format_fixed(r.speedup, 2) << std::setw(8)
            << growth << (r.budgets_respected ? "ok" : "exceeded") << "\n";
    }
    return out.str();
}

} // namespace forge
