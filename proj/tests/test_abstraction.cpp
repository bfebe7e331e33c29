#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "forge/abstraction.hpp"
#include "support/oracles.hpp"

using namespace forge;

namespace {

Vec angle_vec(double degrees) {
    double rad = degrees * 3.14159265358979323846 / 180.0;
    return Vec{static_cast<float>(std::cos(rad)), static_cast<float>(std::sin(rad))};
}

MethodNode leaf(NodeId id, Vec v) {
    MethodNode n;
    n.id = id;
    n.name = "m" + std::to_string(id);
    n.summary = "method number " + std::to_string(id);
    n.keywords = {"k" + std::to_string(id % 4)};
    n.embedding = std::move(v);
    return n;
}

// Four tight pairs of leaves at the compass points.
std::vector<MethodNode> compass_leaves() {
    std::vector<MethodNode> leaves;
    NodeId id = 1;
    for (double base : {0.0, 90.0, 180.0, 270.0}) {
        leaves.push_back(leaf(id++, angle_vec(base)));
        leaves.push_back(leaf(id++, angle_vec(base + 4.0)));
    }
    return leaves;
}

} // namespace

TEST_SUITE_BEGIN("abstraction");

TEST_CASE("geometric schedule hits the anchor counts") {
    auto s = make_schedule(1000, 3, 32, 8, 1);
    CHECK(s.rho == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.counts == std::vector<int>{32, 16, 8});

    auto flat = make_schedule(1000, 1, 12, 12, 1);
    CHECK(flat.rho == 1.0);
    CHECK(flat.counts == std::vector<int>{12});

    auto floored = make_schedule(1000, 2, 10, 5, 7);
    CHECK(floored.counts == std::vector<int>{10, 7});
}

TEST_CASE("schedule matches the closed-form oracle across the grid") {
    for (int k1 : {10, 16, 32})
        for (int kn : {5, 8})
            for (int n : {2, 3, 4}) {
                auto got = make_schedule(1000, n, k1, kn, 1);
                auto want = oracle::schedule(n, k1, kn, 1);
                CHECK(got.rho == doctest::Approx(want.rho).epsilon(1e-12));
                CHECK(got.counts == want.counts);
                for (std::size_t t = 1; t < got.counts.size(); ++t)
                    CHECK(got.counts[t] <= got.counts[t - 1]);
            }
}

TEST_CASE("schedule defaults derive from the leaf count") {
    auto s = make_schedule(100, 3, 0, 0, 1);
    CHECK(s.k1 == 10);    // ceil(sqrt(100))
    CHECK(s.kn == 5);     // ceil(10/4) lifted to the floor of 5
    CHECK(s.counts.front() == 10);
    CHECK(s.counts.back() == 5);

    auto tiny = make_schedule(4, 2, 0, 0, 1);
    CHECK(tiny.k1 == 2);
    CHECK(tiny.kn == 2);  // capped by k1
}

TEST_CASE("schedule validates its inputs") {
    CHECK_THROWS_AS(make_schedule(10, 0, 4, 2, 1), ValidationError);
    CHECK_THROWS_AS(make_schedule(0, 2, 4, 2, 1), ValidationError);
    CHECK_THROWS_AS(make_schedule(10, 2, 4, 2, 0), ValidationError);
    CHECK_THROWS_AS(make_schedule(10, 2, -4, 2, 1), ValidationError);
}

TEST_CASE("summarizer picks the medoid and prefixes frequent keywords") {
    Vec a = angle_vec(0), b = angle_vec(20), c = angle_vec(40);
    std::vector<SummaryMember> members{
        {1, "left method", {"shared", "left"}, &a},
        {2, "middle method", {"shared", "mid"}, &b},
        {3, "right method", {"shared", "right"}, &c},
    };
    std::uint64_t want = oracle::medoid({{1, a}, {2, b}, {3, c}});
    CHECK(want == 2);

    StubSummarizer summarizer;
    std::string out = summarizer.summarize(members);
    CHECK(out == "[shared left mid] middle method");
}

TEST_CASE("duplicate members keep the smallest id as medoid") {
    Vec v = angle_vec(10);
    std::vector<SummaryMember> members{
        {7, "late copy", {}, &v},
        {4, "early copy", {}, &v},
        {9, "another copy", {}, &v},
    };
    StubSummarizer summarizer;
    CHECK(summarizer.summarize(members) == "early copy");
}

TEST_CASE("a singleton summarizes as itself") {
    Vec v = angle_vec(0);
    std::vector<SummaryMember> one{{3, "only member", {"alpha", "beta"}, &v}};
    StubSummarizer summarizer;
    CHECK(summarizer.summarize(one) == "[alpha beta] only member");

    std::vector<SummaryMember> bare{{3, "only member", {}, &v}};
    CHECK(summarizer.summarize(bare) == "only member");
}

TEST_CASE("summarizer rejects degenerate input") {
    StubSummarizer summarizer;
    CHECK_THROWS_AS(summarizer.summarize({}), ValidationError);
    std::vector<SummaryMember> missing{{1, "no embedding", {}, nullptr}};
    CHECK_THROWS_AS(summarizer.summarize(missing), ValidationError);
}

TEST_CASE("clustering separates far pairs") {
    std::vector<std::uint64_t> ids{1, 2, 3, 4};
    std::vector<Vec> vecs{angle_vec(0), angle_vec(5), angle_vec(180), angle_vec(185)};
    auto clusters = cluster_level(ids, vecs, 2, 42);
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0] == std::vector<std::uint64_t>{1, 2});
    CHECK(clusters[1] == std::vector<std::uint64_t>{3, 4});
}

TEST_CASE("k equal to the item count gives singletons") {
    std::vector<std::uint64_t> ids{5, 6, 7};
    std::vector<Vec> vecs{angle_vec(0), angle_vec(120), angle_vec(240)};
    auto clusters = cluster_level(ids, vecs, 3, 1);
    REQUIRE(clusters.size() == 3);
    for (const auto& c : clusters) CHECK(c.size() == 1);

    // k beyond the item count clamps down.
    CHECK(cluster_level(ids, vecs, 10, 1).size() == 3);
}

TEST_CASE("clustering is deterministic for a fixed seed") {
    std::mt19937_64 rng(9);
    std::vector<std::uint64_t> ids;
    std::vector<Vec> vecs;
    for (std::uint64_t i = 1; i <= 50; ++i) {
        ids.push_back(i);
        vecs.push_back(oracle::unit_vec(8, rng));
    }
    auto a = cluster_level(ids, vecs, 7, 123);
    auto b = cluster_level(ids, vecs, 7, 123);
    CHECK(a == b);

    for (const auto& cluster : a) CHECK_FALSE(cluster.empty());
    std::size_t total = 0;
    for (const auto& cluster : a) total += cluster.size();
    CHECK(total == ids.size());
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].front() < a[i].front());
}

TEST_CASE("a single leaf builds a one-cluster spine") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    std::vector<MethodNode> one{leaf(1, embedder.embed("only method"))};
    auto schedule = make_schedule(1, 3, 1, 1, 1);
    auto tree = AbstractionTree::build(one, schedule, 1, summarizer, embedder);

    CHECK(tree.level_count() == 3);
    for (int t = 1; t <= 3; ++t) CHECK(tree.level(t).size() == 1);
    CHECK(tree.path_to_leaf(1).size() == 3);
    tree.validate_partition();
}

TEST_CASE("two-level build respects the schedule and partitions the leaves") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    auto leaves = compass_leaves();
    auto schedule = make_schedule(leaves.size(), 2, 4, 2, 1);
    auto tree = AbstractionTree::build(leaves, schedule, 7, summarizer, embedder);

    CHECK(tree.level_count() == 2);
    CHECK(tree.level(1).size() == 4);
    CHECK(tree.level(2).size() == 2);
    tree.validate_partition();

    std::set<NodeId> seen;
    for (ClusterId root : tree.top_level())
        for (NodeId l : tree.leaves_under(root)) seen.insert(l);
    CHECK(seen.size() == leaves.size());

    for (const auto& l : leaves) {
        auto path = tree.path_to_leaf(l.id);
        REQUIRE(path.size() == 2);
        CHECK(path[1] == tree.leaf_cluster_of(l.id));
        CHECK(path[0] == tree.top_cluster_of(l.id));
        CHECK(tree.parent_of(path[1]) == path[0]);
        CHECK_FALSE(tree.parent_of(path[0]).has_value());
    }

    for (const auto* c : tree.all_clusters()) {
        CHECK_FALSE(c->children.empty());
        CHECK_FALSE(c->summary.empty());
        CHECK_FALSE(c->summary_embedding.empty());
    }
}

TEST_CASE("level one keeps tight pairs together") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    auto leaves = compass_leaves();
    auto schedule = make_schedule(leaves.size(), 2, 4, 2, 1);
    auto tree = AbstractionTree::build(leaves, schedule, 7, summarizer, embedder);
    for (NodeId first : {NodeId{1}, NodeId{3}, NodeId{5}, NodeId{7}})
        CHECK(tree.leaf_cluster_of(first) == tree.leaf_cluster_of(first + 1));
}

TEST_CASE("an inserted leaf lands in the closest cluster") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    auto leaves = compass_leaves();
    auto schedule = make_schedule(leaves.size(), 2, 4, 2, 1);
    auto tree = AbstractionTree::build(leaves, schedule, 7, summarizer, embedder);

    // A leaf aligned exactly with one cluster's summary direction must join it.
    ClusterId target = tree.level(1)[2];
    MethodNode extra = leaf(100, tree.cluster(target).summary_embedding);
    bool rebuild = tree.insert_leaf(extra, 64);
    CHECK_FALSE(rebuild);
    CHECK(tree.leaf_cluster_of(100) == target);
    CHECK(tree.insertions_since_rebuild() == 1);
    CHECK(tree.stale_count() > 0);
    tree.validate_partition();

    leaves.push_back(extra);
    tree.refresh(leaves, summarizer, embedder);
    CHECK(tree.stale_count() == 0);
}

TEST_CASE("the rebuild flag fires on schedule") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    auto leaves = compass_leaves();
    auto schedule = make_schedule(leaves.size(), 2, 4, 2, 1);
    auto tree = AbstractionTree::build(leaves, schedule, 7, summarizer, embedder);

    auto fresh = [&](NodeId id) { return leaf(id, embedder.embed("novel " + std::to_string(id))); };
    CHECK_FALSE(tree.insert_leaf(fresh(200), 3));
    CHECK_FALSE(tree.insert_leaf(fresh(201), 3));
    CHECK(tree.insert_leaf(fresh(202), 3));
    CHECK(tree.insertions_since_rebuild() == 3);
    CHECK_THROWS_AS(tree.insert_leaf(fresh(200), 3), IntegrityError);
    CHECK_THROWS_AS(tree.insert_leaf(fresh(300), 0), ValidationError);
}

TEST_CASE("an empty tree bootstraps a spine on first insert") {
    AbstractionTree tree;
    CHECK(tree.empty());
    CHECK_FALSE(tree.insert_leaf(leaf(1, angle_vec(30)), 64));
    CHECK_FALSE(tree.empty());
    CHECK(tree.leaf_count() == 1);
    CHECK(tree.leaf_cluster_of(1) == tree.level(1).front());
    tree.validate_partition();
}

TEST_CASE("restore reproduces the built structure") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    auto leaves = compass_leaves();
    auto schedule = make_schedule(leaves.size(), 2, 4, 2, 1);
    auto tree = AbstractionTree::build(leaves, schedule, 7, summarizer, embedder);

    std::vector<ClusterNode> rows;
    for (const auto* c : tree.all_clusters()) rows.push_back(*c);
    auto back = AbstractionTree::restore(rows, tree.schedule(), tree.next_cluster_id(),
                                         tree.insertions_since_rebuild());

    CHECK(back.level_count() == tree.level_count());
    CHECK(back.cluster_count() == tree.cluster_count());
    CHECK(back.next_cluster_id() == tree.next_cluster_id());
    for (const auto& l : leaves) {
        CHECK(back.leaf_cluster_of(l.id) == tree.leaf_cluster_of(l.id));
        CHECK(back.path_to_leaf(l.id) == tree.path_to_leaf(l.id));
    }
    back.validate_partition();
}

TEST_CASE("partition validation catches orphaned children") {
    ClusterNode c1;
    c1.id = 1;
    c1.level = 1;
    c1.children = {10, 11};
    ClusterNode c2;
    c2.id = 2;
    c2.level = 2;
    c2.children = {1, 99};  // 99 is not a level-1 cluster
    ClusterSchedule s;
    s.levels = 2;
    s.k1 = 1;
    s.kn = 1;
    s.kmin = 1;
    s.counts = {1, 1};
    CHECK_THROWS_AS(AbstractionTree::restore({c1, c2}, s, 3, 0), IntegrityError);
}

TEST_CASE("build is deterministic for a fixed seed") {
    StubEmbedder embedder(16);
    StubSummarizer summarizer;
    std::mt19937_64 rng(33);
    std::vector<MethodNode> leaves;
    for (NodeId i = 1; i <= 40; ++i) leaves.push_back(leaf(i, oracle::unit_vec(16, rng)));
    auto schedule = make_schedule(leaves.size(), 3, 0, 0, 1);

    auto a = AbstractionTree::build(leaves, schedule, 5, summarizer, embedder);
    auto b = AbstractionTree::build(leaves, schedule, 5, summarizer, embedder);
    REQUIRE(a.cluster_count() == b.cluster_count());
    for (const auto& l : leaves) CHECK(a.path_to_leaf(l.id) == b.path_to_leaf(l.id));
    for (const auto* c : a.all_clusters()) {
        const auto& other = b.cluster(c->id);
        CHECK(c->children == other.children);
        CHECK(c->summary == other.summary);
    }
}

TEST_SUITE_END();
