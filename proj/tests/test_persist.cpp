#include <doctest.h>

#include <cstdlib>

#include "forge/quality.hpp"
#include "forge/snapshot.hpp"
#include "forge/util.hpp"
#include "support/harness.hpp"
#include "support/oracles.hpp"

using namespace forge;

namespace {

struct RepoFixture {
    Config config;
    StubEmbedder embedder{32};
    StubSummarizer summarizer;
    RuleBasedExtractor extractor;
    Repository repo;

    RepoFixture() {
        config.dimension = 32;
        config.abstraction.levels = 2;
        auto docs = read_corpus_jsonl(std::string(FORGE_FIXTURE_DIR) + "/fixture_corpus.jsonl");
        repo = Repository::build_from_corpus(docs, config, embedder, extractor, summarizer);
    }

    // One verified and one conjectured candidate, written back so the store
    // carries shares, statuses and writeback audit records.
    void grow() {
        auto cand = [&](std::uint64_t id, std::vector<std::pair<NodeId, double>> parents,
                        CandidateStatus status) {
            CandidateInnovation c;
            c.id = id;
            c.summary = "grown candidate " + std::to_string(id);
            c.operator_id = "induction";
            c.novelty_notes = "notes";
            c.applicability = "anywhere";
            c.validation_plan = "benchmark";
            double sum = 0.0;
            for (auto& [pid, w] : parents) sum += w;
            for (auto& [pid, w] : parents) {
                ParentAttribution pa;
                pa.id = pid;
                pa.weight = w / sum;
                pa.share = (w / sum) / (1.0 + 1e-9);
                pa.explanation = "parent " + std::to_string(pid);
                c.parents.push_back(std::move(pa));
            }
            c.status = status;
            return c;
        };
        std::vector<CandidateInnovation> cands{
            cand(1, {{1, 0.7}, {2, 0.3}}, CandidateStatus::verified),
            cand(2, {{3, 1.0}}, CandidateStatus::conjecture),
        };
        write_back(repo, cands, summarizer, embedder);
    }
};

void check_equal(const Repository& a, const Repository& b) {
    CHECK(a.version == b.version);
    CHECK(a.next_node_id == b.next_node_id);
    CHECK(a.next_candidate_id == b.next_candidate_id);

    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        const auto& x = a.nodes[i];
        const auto& y = b.nodes[i];
        CHECK(x.id == y.id);
        CHECK(x.name == y.name);
        CHECK(x.summary == y.summary);
        CHECK(x.keywords == y.keywords);
        CHECK(x.embedding == y.embedding);
        CHECK(x.status == y.status);
        CHECK(x.merged_from == y.merged_from);
        REQUIRE(x.sources.size() == y.sources.size());
        for (std::size_t s = 0; s < x.sources.size(); ++s) {
            CHECK(x.sources[s].doc_id == y.sources[s].doc_id);
            CHECK(x.sources[s].segment_id == y.sources[s].segment_id);
        }
    }

    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
        const auto& x = a.edges[i];
        const auto& y = b.edges[i];
        CHECK(x.src == y.src);
        CHECK(x.dst == y.dst);
        CHECK(x.rating == y.rating);
        CHECK(x.weight == y.weight);
        CHECK(x.share == y.share);
        CHECK(x.explanation == y.explanation);
        CHECK(x.kind == y.kind);
        CHECK(x.demoted == y.demoted);
    }

    REQUIRE(a.audit.size() == b.audit.size());
    for (std::size_t i = 0; i < a.audit.size(); ++i) {
        const auto& x = a.audit.records()[i];
        const auto& y = b.audit.records()[i];
        CHECK(x.sequence == y.sequence);
        CHECK(x.timestamp == y.timestamp);
        CHECK(x.actor == y.actor);
        CHECK(x.event == y.event);
        CHECK(x.snapshot_version == y.snapshot_version);
    }

    CHECK(a.abstraction.cluster_count() == b.abstraction.cluster_count());
    CHECK(a.abstraction.next_cluster_id() == b.abstraction.next_cluster_id());
    for (const auto& n : a.nodes)
        CHECK(a.abstraction.path_to_leaf(n.id) == b.abstraction.path_to_leaf(n.id));
    for (const auto& n : a.nodes) {
        auto pa = a.provenance.primary(n.id);
        auto pb = b.provenance.primary(n.id);
        CHECK(pa.has_value() == pb.has_value());
        if (pa && pb) {
            CHECK(pa->parent == pb->parent);
            CHECK(pa->weight == pb->weight);
        }
    }
}

// Recomputes a tampered file's manifest hash so only later checks fire.
void bless_file(const std::string& dir, const std::string& file) {
    std::string manifest_path = dir + "/manifest.json";
    auto manifest = nlohmann::ordered_json::parse(harness::read_file(manifest_path));
    std::string body = harness::read_file(dir + "/" + file);
    for (auto& f : manifest.at("files"))
        if (f.at("path") == file) f["hash"] = to_hex(fnv1a64(body));
    harness::write_file(manifest_path, manifest.dump(2) + "\n");
}

} // namespace

TEST_SUITE_BEGIN("persist");

TEST_CASE("an empty repository survives the round trip") {
    harness::TempDir dir("snap-empty");
    Repository repo;
    save_snapshot(repo, dir.path().string());

    auto back = load_snapshot(dir.path().string(), repo.config);
    CHECK(back.version == 0);
    CHECK(back.nodes.empty());
    CHECK(back.edges.empty());
    CHECK(back.audit.size() == 0);
    CHECK(back.next_node_id == 1);
    back.check_invariants();
}

TEST_CASE("a grown repository round-trips field for field") {
    RepoFixture f;
    f.grow();
    REQUIRE(f.repo.version == 2);

    harness::TempDir dir("snap-grown");
    save_snapshot(f.repo, dir.path().string());
    auto back = load_snapshot(dir.path().string(), f.config);
    check_equal(f.repo, back);
    back.check_invariants();

    // The restored store keeps answering queries.
    auto ctx = back.run_query("adaptive gradient optimization", f.embedder);
    CHECK_FALSE(ctx.leaves.empty());
}

TEST_CASE("save, load and save again is byte-stable") {
    RepoFixture f;
    f.grow();
    harness::TempDir first("snap-a");
    harness::TempDir second("snap-b");
    save_snapshot(f.repo, first.path().string());
    auto back = load_snapshot(first.path().string(), f.config);
    save_snapshot(back, second.path().string());

    for (const char* name : {"manifest.json", "nodes.jsonl", "edges.jsonl", "clusters.jsonl",
                             "audit.jsonl"}) {
        CHECK(harness::read_file(first.sub(name)) ==
              harness::read_file(second.sub(name)));
    }
}

TEST_CASE("a truncated data file is rejected by its hash") {
    RepoFixture f;
    harness::TempDir dir("snap-trunc");
    save_snapshot(f.repo, dir.path().string());

    std::string path = dir.sub("edges.jsonl");
    std::string body = harness::read_file(path);
    std::size_t cut = body.rfind('\n', body.size() - 2);
    harness::write_file(path, body.substr(0, cut + 1));

    CHECK_THROWS_WITH_AS(load_snapshot(dir.path().string(), f.config),
                         doctest::Contains("edges.jsonl"), IntegrityError);
}

TEST_CASE("a corrupted byte is rejected by its hash") {
    RepoFixture f;
    harness::TempDir dir("snap-flip");
    save_snapshot(f.repo, dir.path().string());

    std::string path = dir.sub("nodes.jsonl");
    std::string body = harness::read_file(path);
    body[body.find("Gradient")] = 'X';
    harness::write_file(path, body);

    CHECK_THROWS_WITH_AS(load_snapshot(dir.path().string(), f.config),
                         doctest::Contains("nodes.jsonl"), IntegrityError);
}

TEST_CASE("a malformed row names its file and line") {
    RepoFixture f;
    harness::TempDir dir("snap-row");
    save_snapshot(f.repo, dir.path().string());

    std::string path = dir.sub("nodes.jsonl");
    std::string body = harness::read_file(path);
    std::size_t eol = body.find('\n');
    harness::write_file(path, "this is not json" + body.substr(eol));
    bless_file(dir.path().string(), "nodes.jsonl");

    CHECK_THROWS_WITH_AS(load_snapshot(dir.path().string(), f.config),
                         doctest::Contains("nodes.jsonl line 1"), ValidationError);
}

TEST_CASE("a row count that disagrees with the manifest is rejected") {
    RepoFixture f;
    harness::TempDir dir("snap-count");
    save_snapshot(f.repo, dir.path().string());

    std::string path = dir.sub("audit.jsonl");
    std::string body = harness::read_file(path);
    std::size_t cut = body.rfind('\n', body.size() - 2);
    harness::write_file(path, body.substr(0, cut + 1));
    bless_file(dir.path().string(), "audit.jsonl");

    CHECK_THROWS_WITH_AS(load_snapshot(dir.path().string(), f.config),
                         doctest::Contains("row count"), IntegrityError);
}

TEST_CASE("config drift and format drift are refused up front") {
    RepoFixture f;
    harness::TempDir dir("snap-drift");
    save_snapshot(f.repo, dir.path().string());

    Config other = f.config;
    other.funnel.top_budget = 16;
    CHECK_THROWS_AS(load_snapshot(dir.path().string(), other), ConflictError);

    std::string manifest_path = dir.sub("manifest.json");
    auto manifest = nlohmann::ordered_json::parse(harness::read_file(manifest_path));
    manifest["format_version"] = 99;
    harness::write_file(manifest_path, manifest.dump(2) + "\n");
    CHECK_THROWS_WITH_AS(load_snapshot(dir.path().string(), f.config),
                         doctest::Contains("format_version"), ValidationError);

    CHECK_THROWS_AS(load_snapshot(dir.sub("nowhere"), f.config), NotFoundError);
}

TEST_CASE("the audit log only ever grows forward") {
    RepoFixture f;
    harness::TempDir before("snap-audit-1");
    harness::TempDir after("snap-audit-2");
    save_snapshot(f.repo, before.path().string());
    f.grow();
    save_snapshot(f.repo, after.path().string());

    std::string early = harness::read_file(before.sub("audit.jsonl"));
    std::string late = harness::read_file(after.sub("audit.jsonl"));
    REQUIRE(late.size() > early.size());
    CHECK(late.compare(0, early.size(), early) == 0);
}

TEST_CASE("unknown config keys are named exactly") {
    CHECK_THROWS_WITH_AS(Config::from_json(nlohmann::json{{"dimensio", 3}}),
                         doctest::Contains("unknown config key: dimensio"), ValidationError);
    CHECK_THROWS_WITH_AS(
        Config::from_json(nlohmann::json{{"funnel", {{"topbudget", 4}}}}),
        doctest::Contains("unknown config key: funnel.topbudget"), ValidationError);
    CHECK_THROWS_WITH_AS(
        Config::from_json(nlohmann::json{{"scoring", {{"weights", {{"novety", 0.2}}}}}}),
        doctest::Contains("unknown config key: scoring.weights.novety"), ValidationError);
}

TEST_CASE("config serialization round-trips through its hash") {
    Config c;
    c.dimension = 64;
    c.funnel.top_budget = 12;
    c.scoring.threshold = 0.4;
    c.providers.verifier = "pass";
    c.ann.enabled = true;

    Config back = Config::from_json(c.to_json());
    CHECK(back.hash() == c.hash());
    CHECK(back.dimension == 64);
    CHECK(back.funnel.top_budget == 12);
    CHECK(back.scoring.threshold == 0.4);
    CHECK(back.providers.verifier == "pass");
    CHECK(back.ann.enabled);

    Config defaults;
    CHECK(defaults.hash() != c.hash());
    CHECK(Config{}.hash() == defaults.hash());
}

TEST_CASE("config files are loaded and validated") {
    harness::TempDir dir("config");
    std::string path = dir.sub("forge.json");
    harness::write_file(path, "{\"dimension\": 16, \"funnel\": {\"decay\": 0.25}}\n");
    Config c = Config::from_file(path);
    CHECK(c.dimension == 16);
    CHECK(c.funnel.decay == 0.25);

    harness::write_file(path, "{broken\n");
    CHECK_THROWS_AS(Config::from_file(path), ValidationError);
    CHECK_THROWS_AS(Config::from_file(dir.sub("absent.json")), NotFoundError);
}

TEST_CASE("validation rejects out-of-range settings") {
    auto broken = [](auto mutate) {
        Config c;
        mutate(c);
        return c;
    };
    CHECK_THROWS_AS(broken([](Config& c) { c.dimension = 0; }).validate(), ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.epsilon = 0.0; }).validate(), ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.dedup.merge_threshold = 1.0; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.funnel.decay = 1.0; }).validate(), ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.backtrack.influence_threshold = 0.0; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.scoring.weights.novelty = 0.5; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.scoring.threshold = 1.5; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.verify.policy = "lenient"; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.providers.embedder = "quantum"; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.providers.embedder = "http"; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.ingest.length_unit = "words"; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(broken([](Config& c) { c.ann.nprobe = 0; }).validate(), ValidationError);
    CHECK_NOTHROW(Config{}.validate());
}

TEST_CASE("the embed endpoint can be injected from the environment") {
    Config c;
    REQUIRE(setenv("METHODFORGE_EMBED_ENDPOINT", "http://127.0.0.1:4100/embed", 1) == 0);
    c.apply_env_overrides();
    CHECK(c.providers.embed_endpoint == "http://127.0.0.1:4100/embed");
    CHECK(c.providers.embedder == "http");

    REQUIRE(unsetenv("METHODFORGE_EMBED_ENDPOINT") == 0);
    Config untouched;
    untouched.apply_env_overrides();
    CHECK(untouched.providers.embed_endpoint.empty());
    CHECK(untouched.providers.embedder == "stub");
}

TEST_SUITE_END();
