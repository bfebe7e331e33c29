#include <doctest.h>

#include <random>
#include <set>

#include "forge/funnel.hpp"
#include "support/oracles.hpp"

using namespace forge;

namespace {

struct Fixture {
    StubEmbedder embedder{32};
    StubSummarizer summarizer;
    std::vector<MethodNode> leaves;
    AbstractionTree tree;
    SimilarityIndex cluster_index;
    SimilarityIndex leaf_index;

    Fixture(std::size_t n, int levels, std::uint64_t seed) {
        for (std::size_t i = 0; i < n; ++i) {
            MethodNode node;
            node.id = static_cast<NodeId>(i + 1);
            node.name = "m" + std::to_string(node.id);
            node.summary = "topic" + std::to_string(i % 5) + " item " + std::to_string(node.id);
            node.keywords = {"topic" + std::to_string(i % 5)};
            node.embedding = embedder.embed(node.summary);
            leaves.push_back(std::move(node));
        }
        auto schedule = make_schedule(n, levels, 0, 0, 1);
        tree = AbstractionTree::build(leaves, schedule, seed, summarizer, embedder);
        for (const auto* c : tree.all_clusters())
            cluster_index.add(c->id, c->summary_embedding);
        for (const auto& l : leaves) leaf_index.add(l.id, l.embedding);
    }

    RetrievalContext run(const Vec& query, const FunnelParams& params) {
        return funnel_retrieve(tree, cluster_index, leaf_index, "q", query, params);
    }

    std::vector<std::pair<std::uint64_t, Vec>> leaf_items() const {
        std::vector<std::pair<std::uint64_t, Vec>> items;
        for (const auto& l : leaves) items.emplace_back(l.id, l.embedding);
        return items;
    }
};

} // namespace

TEST_SUITE_BEGIN("funnel");

TEST_CASE("budgets decay geometrically and floor at one") {
    std::vector<int> got;
    for (int t = 1; t <= 6; ++t) got.push_back(funnel_budget(8, 0.5, t));
    CHECK(got == std::vector<int>{8, 4, 2, 1, 1, 1});
    CHECK(funnel_budget(17, 0.3, 1) == 17);
    CHECK(funnel_budget(1, 0.9, 1) == 1);
    CHECK(funnel_budget(1, 0.9, 40) == 1);
}

TEST_CASE("budgets match the exact rational oracle") {
    struct Decay { double eta; std::uint64_t num, den; };
    for (Decay d : {Decay{0.25, 1, 4}, Decay{0.5, 1, 2}, Decay{0.75, 3, 4}})
        for (int k1 : {3, 5, 7, 11, 13, 17, 19, 23, 29, 31})
            for (int t = 1; t <= 8; ++t)
                CHECK(funnel_budget(k1, d.eta, t) == oracle::budget_rational(k1, d.num, d.den, t));
}

TEST_CASE("budget parameters are validated") {
    CHECK_THROWS_AS(funnel_budget(0, 0.5, 1), ValidationError);
    CHECK_THROWS_AS(funnel_budget(-3, 0.5, 1), ValidationError);
    CHECK_THROWS_AS(funnel_budget(4, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(funnel_budget(4, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(funnel_budget(4, -0.1, 1), ValidationError);
    CHECK_THROWS_AS(funnel_budget(4, 0.5, 0), ValidationError);
}

TEST_CASE("a single-leaf spine descends one path") {
    Fixture f(1, 3, 7);
    FunnelParams params;
    params.k1 = 4;
    params.eta = 0.5;
    auto ctx = f.run(f.leaves[0].embedding, params);

    REQUIRE(ctx.trace.size() == 4);
    CHECK(ctx.trace[0].level == 3);
    CHECK(ctx.trace[1].level == 2);
    CHECK(ctx.trace[2].level == 1);
    CHECK(ctx.trace[3].level == 0);
    for (const auto& step : ctx.trace) {
        CHECK(step.pool.size() == 1);
        CHECK(step.selected.size() == 1);
    }
    REQUIRE(ctx.leaves.size() == 1);
    CHECK(ctx.leaves[0].first == 1);
    CHECK(ctx.leaves[0].second == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("querying with a leaf's own embedding ranks it first") {
    Fixture f(24, 2, 11);
    FunnelParams params;
    params.k1 = static_cast<int>(f.leaves.size());
    params.eta = 0.99;
    params.k_leaf = 5;
    for (NodeId probe : {NodeId{1}, NodeId{9}, NodeId{24}}) {
        auto ctx = f.run(f.leaves[probe - 1].embedding, params);
        REQUIRE_FALSE(ctx.leaves.empty());
        CHECK(ctx.leaves[0].first == probe);
        CHECK(ctx.leaves[0].second == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("the trace records a well-formed descent") {
    Fixture f(40, 3, 3);
    FunnelParams params;
    params.k1 = 4;
    params.eta = 0.5;
    auto ctx = f.run(f.embedder.embed("topic2 probe"), params);

    REQUIRE(ctx.trace.size() == static_cast<std::size_t>(f.tree.level_count()) + 1);
    CHECK(ctx.trace.front().level == f.tree.level_count());
    CHECK(ctx.trace.back().level == 0);

    for (std::size_t i = 0; i < ctx.trace.size(); ++i) {
        const auto& step = ctx.trace[i];
        int budget = funnel_budget(params.k1, params.eta, static_cast<int>(i + 1));
        CHECK(step.selected.size() ==
              std::min(static_cast<std::size_t>(budget), step.pool.size()));
        CHECK(std::is_sorted(step.pool.begin(), step.pool.end()));

        std::set<std::uint64_t> pool(step.pool.begin(), step.pool.end());
        for (std::size_t j = 0; j < step.selected.size(); ++j) {
            CHECK(pool.count(step.selected[j].first) == 1);
            if (j) {
                bool ranked = step.selected[j - 1].second > step.selected[j].second ||
                              (step.selected[j - 1].second == step.selected[j].second &&
                               step.selected[j - 1].first < step.selected[j].first);
                CHECK(ranked);
            }
        }
        if (i + 1 < ctx.trace.size()) {
            // The next pool is exactly the children of what was selected here.
            std::vector<std::uint64_t> expect;
            for (const auto& [id, sim] : step.selected) {
                const auto& child = f.tree.cluster(id).children;
                expect.insert(expect.end(), child.begin(), child.end());
            }
            std::sort(expect.begin(), expect.end());
            expect.erase(std::unique(expect.begin(), expect.end()), expect.end());
            CHECK(ctx.trace[i + 1].pool == expect);
        }
    }
    CHECK(ctx.leaves.size() == ctx.trace.back().selected.size());
}

TEST_CASE("comparison counters account for every pool scan") {
    Fixture f(30, 2, 5);
    f.cluster_index.reset_comparisons();
    f.leaf_index.reset_comparisons();
    FunnelParams params;
    params.k1 = 3;
    params.eta = 0.5;
    auto ctx = f.run(f.embedder.embed("topic1 probe"), params);

    std::size_t cluster_pool = 0;
    for (const auto& step : ctx.trace)
        if (step.level > 0) cluster_pool += step.pool.size();
    CHECK(f.cluster_index.comparisons() == cluster_pool);
    CHECK(f.leaf_index.comparisons() == ctx.trace.back().pool.size());

    auto report = cost_report(ctx.trace, params.k1, params.eta);
    CHECK(report.total_comparisons == cluster_pool + ctx.trace.back().pool.size());
}

TEST_CASE("a saturated funnel reduces to flat retrieval") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        std::size_t n = 10 + seed * 10;
        Fixture f(n, 2, seed);
        FunnelParams params;
        params.k1 = static_cast<int>(n);
        params.eta = 0.99;
        params.k_leaf = 10;
        Vec q = f.embedder.embed("topic3 probe " + std::to_string(seed));
        auto ctx = f.run(q, params);
        auto want = oracle::top_k(f.leaf_items(), q, 10);
        REQUIRE(ctx.leaves.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(ctx.leaves[i].first == want[i].first);
            CHECK(ctx.leaves[i].second == doctest::Approx(want[i].second).epsilon(1e-9));
        }
    }
}

TEST_CASE("retrieval validates its inputs") {
    Fixture f(8, 2, 1);
    AbstractionTree empty;
    SimilarityIndex unused;
    FunnelParams params;
    CHECK_THROWS_AS(
        funnel_retrieve(empty, unused, unused, "q", f.leaves[0].embedding, params),
        NotFoundError);

    FunnelParams bad_leaf;
    bad_leaf.k_leaf = 0;
    CHECK_THROWS_AS(f.run(f.leaves[0].embedding, bad_leaf), ValidationError);

    FunnelParams bad_eta;
    bad_eta.eta = 1.0;
    CHECK_THROWS_AS(f.run(f.leaves[0].embedding, bad_eta), ValidationError);
    FunnelParams bad_k1;
    bad_k1.k1 = 0;
    CHECK_THROWS_AS(f.run(f.leaves[0].embedding, bad_k1), ValidationError);
}

TEST_CASE("cost stays within the analytic bound") {
    Fixture f(40, 2, 9);
    FunnelParams params;
    params.k1 = 8;
    params.eta = 0.5;
    auto ctx = f.run(f.embedder.embed("topic0 probe"), params);
    auto report = cost_report(ctx.trace, params.k1, params.eta);

    REQUIRE(report.steps.size() == 3);
    CHECK(report.steps[0].budget == 8);
    CHECK(report.steps[1].budget == 4);
    CHECK(report.steps[2].budget == 2);
    CHECK(report.total_budget == 14);
    CHECK(report.analytic_bound == doctest::Approx(17.0).epsilon(1e-12));
    CHECK(report.total_selected <= report.total_budget);
    CHECK(static_cast<double>(report.total_budget) <= report.analytic_bound);
    for (const auto& step : report.steps)
        CHECK(step.selected <= static_cast<std::size_t>(step.budget));
}

TEST_CASE("a one-step report reduces to k1 plus one") {
    TraceStep step;
    step.level = 0;
    step.pool = {1, 2, 3};
    step.selected = {{2, 0.9}};
    auto report = cost_report({step}, 6, 0.5);
    CHECK(report.analytic_bound == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(report.total_comparisons == 3);
    CHECK(report.total_selected == 1);

    CHECK_THROWS_AS(cost_report({}, 6, 0.5), ValidationError);
    CHECK_THROWS_AS(cost_report({step}, 6, 1.5), ValidationError);
}

TEST_CASE("traces render one line per step") {
    TraceStep top;
    top.level = 2;
    top.pool = {1, 2};
    top.selected = {{2, 0.25}};
    TraceStep leaf;
    leaf.level = 0;
    leaf.pool = {7, 9};
    leaf.selected = {{9, 0.5}, {7, 0.125}};
    CHECK(trace_to_text({top, leaf}) ==
          "level=2 pool=2 selected=c2:0.250000\n"
          "level=leaf pool=2 selected=m9:0.500000,m7:0.125000\n");
    CHECK(trace_to_text({}).empty());
}

TEST_SUITE_END();
