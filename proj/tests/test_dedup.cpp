#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "forge/dedup.hpp"
#include "support/oracles.hpp"

using namespace forge;

namespace {

MethodNode node_with_vec(NodeId id, Vec v) {
    MethodNode n;
    n.id = id;
    n.name = "m" + std::to_string(id);
    n.summary = "summary " + std::to_string(id);
    n.embedding = std::move(v);
    n.sources.push_back({"d" + std::to_string(id), "s0"});
    return n;
}

Vec angle_vec(double degrees) {
    double rad = degrees * 3.14159265358979323846 / 180.0;
    return Vec{static_cast<float>(std::cos(rad)), static_cast<float>(std::sin(rad))};
}

ContributionEdge edge(NodeId src, NodeId dst, int rating, const std::string& why = "") {
    ContributionEdge e;
    e.src = src;
    e.dst = dst;
    e.rating = rating;
    e.weight = rating_to_weight(rating);
    e.explanation = why;
    return e;
}

} // namespace

TEST_SUITE_BEGIN("dedup");

TEST_CASE("identical embeddings merge, orthogonal ones stay apart") {
    std::vector<MethodNode> nodes;
    nodes.push_back(node_with_vec(1, Vec{1.0f, 0.0f}));
    nodes.push_back(node_with_vec(2, Vec{1.0f, 0.0f}));
    nodes.push_back(node_with_vec(3, Vec{0.0f, 1.0f}));

    auto plan = find_merges(nodes, 0.92);
    REQUIRE(plan.components.size() == 2);
    CHECK(plan.components[0] == std::vector<NodeId>{1, 2});
    CHECK(plan.components[1] == std::vector<NodeId>{3});
}

TEST_CASE("similarity exactly at the threshold does not merge") {
    // cos(a, b) is exactly 0.5 in float arithmetic for these two vectors.
    std::vector<MethodNode> nodes;
    nodes.push_back(node_with_vec(1, Vec{1.0f, 0.0f, 0.0f, 0.0f}));
    nodes.push_back(node_with_vec(2, Vec{0.5f, 0.5f, 0.5f, 0.5f}));

    CHECK(find_merges(nodes, 0.5).components.size() == 2);
    CHECK(find_merges(nodes, 0.49).components.size() == 1);
}

TEST_CASE("transitive chains merge through the middle member") {
    // 1 and 3 sit 36 degrees apart (cos 0.809 < delta) yet share a component
    // through 2, which is 18 degrees (cos 0.951 > delta) from both.
    std::vector<MethodNode> nodes;
    nodes.push_back(node_with_vec(1, angle_vec(0)));
    nodes.push_back(node_with_vec(2, angle_vec(18)));
    nodes.push_back(node_with_vec(3, angle_vec(36)));

    auto plan = find_merges(nodes, 0.92);
    REQUIRE(plan.components.size() == 1);
    CHECK(plan.components[0] == std::vector<NodeId>{1, 2, 3});
}

TEST_CASE("merge planning matches the union-find oracle on random corpora") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 15; ++trial) {
        std::vector<MethodNode> nodes;
        std::vector<std::pair<NodeId, Vec>> pool;
        NodeId id = 1;
        std::size_t groups = 2 + rng() % 6;
        for (std::size_t g = 0; g < groups; ++g) {
            Vec base = oracle::unit_vec(8, rng);
            std::size_t copies = 1 + rng() % 3;
            for (std::size_t c = 0; c < copies; ++c) {
                nodes.push_back(node_with_vec(id, base));
                pool.emplace_back(id, base);
                ++id;
            }
        }
        auto plan = find_merges(nodes, 0.92);
        auto want = oracle::merge_components(pool, 0.92);
        CHECK(plan.components == want);
    }
}

TEST_CASE("ann-assisted planning agrees with the flat scan when probes cover the pool") {
    std::mt19937_64 rng(55);
    std::vector<MethodNode> nodes;
    SimilarityIndex index;
    for (NodeId id = 1; id <= 30; ++id) {
        Vec v = id % 3 == 0 ? nodes[id - 2].embedding : oracle::unit_vec(8, rng);
        nodes.push_back(node_with_vec(id, v));
        index.add(id, v);
    }
    auto flat = find_merges(nodes, 0.92);
    auto probed = find_merges(nodes, 0.92, index, nodes.size());
    CHECK(flat.components == probed.components);
}

TEST_CASE("canonicalization keeps the smallest id and concatenates sources in id order") {
    StubEmbedder embedder(16);
    MethodNode a = node_with_vec(4, Vec{});
    a.name = "Adam";
    a.summary = "adaptive moments";
    a.keywords = {"adam"};
    a.sources = {{"d1", "s1"}, {"d1", "s2"}};
    MethodNode b = node_with_vec(9, Vec{});
    b.sources = {{"d2", "s1"}};
    MethodNode c = node_with_vec(2, Vec{});
    c.name = "Adam Optimizer";
    c.sources = {{"d3", "s1"}, {"d1", "s1"}};

    MethodNode canon = canonicalize({&a, &b, &c}, embedder);
    CHECK(canon.id == 2);
    CHECK(canon.name == "Adam Optimizer");
    CHECK(canon.merged_from == std::vector<NodeId>{4, 9});
    REQUIRE(canon.sources.size() == 5);
    CHECK(canon.sources[0] == SourceRef{"d3", "s1"});  // id 2 first
    CHECK(canon.sources[1] == SourceRef{"d1", "s1"});
    CHECK(canon.sources[2] == SourceRef{"d1", "s1"});  // duplicates preserved
    CHECK(canon.sources[4] == SourceRef{"d2", "s1"});
    CHECK(canon.embedding ==
          embedder.embed(embedding_text(canon.name, canon.summary, canon.keywords)));
}

TEST_CASE("edge remapping drops self-loops and keeps the strongest parallel edge") {
    std::map<NodeId, NodeId> mapping{{5, 1}, {6, 2}};
    std::vector<ContributionEdge> edges;
    edges.push_back(edge(5, 1, 3, "collapses to a self-loop"));
    edges.push_back(edge(5, 2, 4, "strong"));
    edges.push_back(edge(1, 6, 2, "weak duplicate"));
    edges.push_back(edge(1, 2, 5, "stronger duplicate"));
    edges.push_back(edge(3, 4, 1, "untouched"));

    auto out = remap_edges(edges, mapping);
    REQUIRE(out.size() == 2);

    CHECK(out[0].src == 1);
    CHECK(out[0].dst == 2);
    CHECK(out[0].rating == 5);
    CHECK(out[0].weight == 1.0);
    CHECK(out[0].explanation == "strong | weak duplicate | stronger duplicate");

    CHECK(out[1].src == 3);
    CHECK(out[1].dst == 4);
    CHECK(out[1].rating == 1);
}

TEST_CASE("parallel merge keeps the maximum weight") {
    std::map<NodeId, NodeId> mapping{{2, 1}};
    std::vector<ContributionEdge> edges;
    edges.push_back(edge(1, 3, 4, "kept"));
    edges.push_back(edge(2, 3, 2, "folded in"));
    auto out = remap_edges(edges, mapping);
    REQUIRE(out.size() == 1);
    CHECK(out[0].weight == 0.75);
    CHECK(out[0].rating == 4);
}

TEST_CASE("full dedup is idempotent and conserves sources") {
    StubEmbedder embedder(32);
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<MethodNode> nodes;
        std::vector<ContributionEdge> edges;
        NodeId id = 1;
        std::size_t groups = 2 + rng() % 5;
        std::vector<NodeId> firsts;
        for (std::size_t g = 0; g < groups; ++g) {
            std::string name = "method " + std::to_string(g) + " variant " +
                               std::to_string(rng() % 1000);
            std::size_t copies = 1 + rng() % 3;
            firsts.push_back(id);
            for (std::size_t c = 0; c < copies; ++c) {
                MethodNode n;
                n.id = id;
                n.name = name;
                n.summary = "does thing " + std::to_string(g);
                n.embedding = embedder.embed(embedding_text(n.name, n.summary, n.keywords));
                n.sources.push_back({"d" + std::to_string(id), "s0"});
                nodes.push_back(std::move(n));
                ++id;
            }
        }
        for (std::size_t g = 1; g < firsts.size(); ++g)
            edges.push_back(edge(firsts[g - 1], firsts[g], 1 + static_cast<int>(rng() % 5)));

        std::size_t sources_before = 0;
        for (const auto& n : nodes) sources_before += n.sources.size();

        auto result = dedup_corpus(nodes, edges, 0.92, embedder);

        std::size_t sources_after = 0;
        std::set<NodeId> live;
        for (const auto& n : result.nodes) {
            sources_after += n.sources.size();
            live.insert(n.id);
        }
        CHECK(sources_after == sources_before);

        for (const auto& n : result.nodes)
            for (NodeId m : n.merged_from) CHECK_FALSE(live.count(m));
        for (const auto& e : result.edges) {
            CHECK(live.count(e.src));
            CHECK(live.count(e.dst));
            CHECK(e.src != e.dst);
            CHECK(e.weight == rating_to_weight(e.rating));
        }
        for (const auto& [from, to] : result.mapping) CHECK(from != to);

        auto second = dedup_corpus(result.nodes, result.edges, 0.92, embedder);
        CHECK(second.merges.empty());
        CHECK(second.nodes.size() == result.nodes.size());
        CHECK(second.edges.size() == result.edges.size());
    }
}

TEST_CASE("planned components drive the surviving node set") {
    StubEmbedder embedder(32);
    std::vector<MethodNode> nodes;
    for (NodeId id : {1, 2, 3}) {
        MethodNode n;
        n.id = id;
        n.name = id == 3 ? "something else" : "same text";
        n.embedding = embedder.embed(n.name);
        nodes.push_back(std::move(n));
    }
    auto result = dedup_corpus(nodes, {}, 0.92, embedder);
    REQUIRE(result.nodes.size() == 2);
    CHECK(result.nodes[0].id == 1);
    CHECK(result.nodes[0].merged_from == std::vector<NodeId>{2});
    CHECK(result.nodes[1].id == 3);
    REQUIRE(result.merges.size() == 1);
    CHECK(result.merges[0].members == std::vector<NodeId>{1, 2});
    CHECK(result.merges[0].canonical == 1);
    CHECK(result.mapping.at(2) == 1);
}

TEST_SUITE_END();
