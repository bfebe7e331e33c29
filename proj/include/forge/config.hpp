#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "forge/core.hpp"

namespace forge {

struct RubricWeights {
    double novelty = 0.20;
    double consistency = 0.35;
    double usefulness = 0.30;
    double explainability = 0.15;
    double sum() const { return novelty + consistency + usefulness + explainability; }
};

struct Config {
    int dimension = 256;
    double epsilon = 1e-9;
    std::uint64_t seed = 1;

    struct {
        std::size_t segment_limit = 4000;
        std::string length_unit = "chars";  // or "tokens"
    } ingest;

    struct {
        double merge_threshold = 0.92;
    } dedup;

    struct {
        int levels = 3;
        int initial_clusters = 0;   // 0: ceil(sqrt(leaf_count))
        int final_clusters = 0;     // 0: clamp(ceil(k1/4), 5, 20)
        int min_clusters = 1;
        std::size_t rebuild_after = 64;
        std::size_t batch_size = 64;
        std::size_t max_iterations = 50;
    } abstraction;

    struct {
        int top_budget = 8;       // k1
        double decay = 0.5;       // eta
        int leaf_budget = 0;      // 0: reuse the next step's budget
    } funnel;

    struct {
        double influence_threshold = 0.25;  // tau
        int max_depth = 6;
    } backtrack;

    struct {
        int depth_min = 1;
        int depth_range = 4;
        double share_exponent = 1.0;  // gamma
    } evidence;

    struct {
        int candidates = 3;      // j
        std::size_t max_parents = 4;
    } synthesis;

    struct {
        RubricWeights weights;
        double threshold = 0.5;  // o
        double clip = 0.25;
        double gate_min_alignment = 0.0;
    } scoring;

    struct {
        std::string policy = "downgrade";  // or "strict"
        std::size_t falsifier_period = 10;
    } verify;

    struct {
        std::uint64_t max_calls = 1000000;
        std::uint64_t max_candidates = 1000000;
    } budgets;

    struct {
        std::string embedder = "stub";   // stub | http
        std::string embed_endpoint;
        std::string extractor = "rules";
        std::string summarizer = "stub";
        std::string generator = "stub";
        std::string scorer = "stub";
        std::string verifier = "null";   // null | pass | fail
    } providers;

    struct {
        bool enabled = false;
        std::size_t nlist = 0;    // 0: ceil(sqrt(N))
        std::size_t nprobe = 8;
    } ann;

    std::string cache_path;

    void validate() const;
    nlohmann::ordered_json to_json() const;

    // Unknown keys anywhere are a validation error naming the key.
    static Config from_json(const nlohmann::json& j);
    static Config from_file(const std::string& path);

    // Hash of the canonical serialization; pins snapshots to their config.
    std::string hash() const;

    // METHODFORGE_EMBED_ENDPOINT overrides providers.embed_endpoint.
    void apply_env_overrides();
};

} // namespace forge
