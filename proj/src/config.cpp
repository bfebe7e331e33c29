#include "forge/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "forge/util.hpp"

namespace forge {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key()))
            throw ValidationError("unknown config key: " +
                                  (scope.empty() ? it.key() : scope + "." + it.key()));
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void Config::validate() const {
    if (dimension < 1) throw ValidationError("dimension must be positive");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (ingest.segment_limit == 0) throw ValidationError("segment_limit must be positive");
    if (ingest.length_unit != "chars" && ingest.length_unit != "tokens")
        throw ValidationError("length_unit must be chars or tokens, got " + ingest.length_unit);
    if (!(dedup.merge_threshold > 0.0 && dedup.merge_threshold < 1.0))
        throw ValidationError("merge_threshold must lie in (0,1)");
    if (abstraction.levels < 1) throw ValidationError("abstraction levels must be positive");
    if (abstraction.initial_clusters < 0 || abstraction.final_clusters < 0)
        throw ValidationError("cluster counts cannot be negative");
    if (abstraction.final_clusters > abstraction.initial_clusters &&
        abstraction.initial_clusters != 0)
        throw ValidationError("final_clusters cannot exceed initial_clusters");
    if (abstraction.min_clusters < 1) throw ValidationError("min_clusters must be positive");
    if (abstraction.rebuild_after == 0) throw ValidationError("rebuild_after must be positive");
    if (abstraction.batch_size == 0) throw ValidationError("batch_size must be positive");
    if (abstraction.max_iterations == 0) throw ValidationError("max_iterations must be positive");
    if (funnel.top_budget < 1) throw ValidationError("top_budget must be positive");
    if (!(funnel.decay > 0.0 && funnel.decay < 1.0))
        throw ValidationError("funnel decay must lie in (0,1)");
    if (funnel.leaf_budget < 0) throw ValidationError("leaf_budget cannot be negative");
    if (!(backtrack.influence_threshold > 0.0 && backtrack.influence_threshold < 1.0))
        throw ValidationError("influence_threshold must lie in (0,1)");
    if (backtrack.max_depth < 1) throw ValidationError("max_depth must be positive");
    if (evidence.depth_min < 0 || evidence.depth_range < 0)
        throw ValidationError("evidence depths cannot be negative");
    if (!(evidence.share_exponent > 0.0))
        throw ValidationError("share_exponent must be positive");
    if (synthesis.candidates < 1) throw ValidationError("candidates must be positive");
    if (synthesis.max_parents == 0) throw ValidationError("max_parents must be positive");
    const auto& w = scoring.weights;
    if (w.novelty < 0 || w.consistency < 0 || w.usefulness < 0 || w.explainability < 0)
        throw ValidationError("rubric weights cannot be negative");
    if (std::abs(w.sum() - 1.0) > 1e-9)
        throw ValidationError("rubric weights must sum to 1, got " + std::to_string(w.sum()));
    if (!(scoring.threshold >= 0.0 && scoring.threshold <= 1.0))
        throw ValidationError("score threshold must lie in [0,1]");
    if (!(scoring.clip >= 0.0 && scoring.clip <= 1.0))
        throw ValidationError("gate clip must lie in [0,1]");
    if (!(scoring.gate_min_alignment >= 0.0 && scoring.gate_min_alignment <= 1.0))
        throw ValidationError("gate_min_alignment must lie in [0,1]");
    if (verify.policy != "downgrade" && verify.policy != "strict")
        throw ValidationError("verify policy must be downgrade or strict");
    if (verify.falsifier_period == 0) throw ValidationError("falsifier_period must be positive");
    if (providers.embedder != "stub" && providers.embedder != "http")
        throw ValidationError("unknown embedder provider: " + providers.embedder);
    if (providers.embedder == "http" && providers.embed_endpoint.empty())
        throw ValidationError("http embedder needs embed_endpoint");
    if (providers.extractor != "rules")
        throw ValidationError("unknown extractor provider: " + providers.extractor);
    if (providers.summarizer != "stub")
        throw ValidationError("unknown summarizer provider: " + providers.summarizer);
    if (providers.generator != "stub")
        throw ValidationError("unknown generator provider: " + providers.generator);
    if (providers.scorer != "stub")
        throw ValidationError("unknown scorer provider: " + providers.scorer);
    if (providers.verifier != "null" && providers.verifier != "pass" &&
        providers.verifier != "fail")
        throw ValidationError("unknown verifier provider: " + providers.verifier);
    if (ann.nprobe == 0) throw ValidationError("ann nprobe must be positive");
}

nlohmann::ordered_json Config::to_json() const {
    nlohmann::ordered_json j;
    j["dimension"] = dimension;
    j["epsilon"] = epsilon;
    j["seed"] = seed;
    j["ingest"] = {{"segment_limit", ingest.segment_limit}, {"length_unit", ingest.length_unit}};
    j["dedup"] = {{"merge_threshold", dedup.merge_threshold}};
    j["abstraction"] = {{"levels", abstraction.levels},
                        {"initial_clusters", abstraction.initial_clusters},
                        {"final_clusters", abstraction.final_clusters},
                        {"min_clusters", abstraction.min_clusters},
                        {"rebuild_after", abstraction.rebuild_after},
                        {"batch_size", abstraction.batch_size},
                        {"max_iterations", abstraction.max_iterations}};
    j["funnel"] = {{"top_budget", funnel.top_budget},
                   {"decay", funnel.decay},
                   {"leaf_budget", funnel.leaf_budget}};
    j["backtrack"] = {{"influence_threshold", backtrack.influence_threshold},
                      {"max_depth", backtrack.max_depth}};
    j["evidence"] = {{"depth_min", evidence.depth_min},
                     {"depth_range", evidence.depth_range},
                     {"share_exponent", evidence.share_exponent}};
    j["synthesis"] = {{"candidates", synthesis.candidates},
                      {"max_parents", synthesis.max_parents}};
    j["scoring"] = {{"weights",
                     {{"novelty", scoring.weights.novelty},
                      {"consistency", scoring.weights.consistency},
                      {"usefulness", scoring.weights.usefulness},
                      {"explainability", scoring.weights.explainability}}},
                    {"threshold", scoring.threshold},
                    {"clip", scoring.clip},
                    {"gate_min_alignment", scoring.gate_min_alignment}};
    j["verify"] = {{"policy", verify.policy}, {"falsifier_period", verify.falsifier_period}};
    j["budgets"] = {{"max_calls", budgets.max_calls}, {"max_candidates", budgets.max_candidates}};
    j["providers"] = {{"embedder", providers.embedder},
                      {"embed_endpoint", providers.embed_endpoint},
                      {"extractor", providers.extractor},
                      {"summarizer", providers.summarizer},
                      {"generator", providers.generator},
                      {"scorer", providers.scorer},
                      {"verifier", providers.verifier}};
    j["ann"] = {{"enabled", ann.enabled}, {"nlist", ann.nlist}, {"nprobe", ann.nprobe}};
    j["cache_path"] = cache_path;
    return j;
}

Config Config::from_json(const nlohmann::json& j) {
    Config c;
    reject_unknown(j, {"dimension", "epsilon", "seed", "ingest", "dedup", "abstraction",
                       "funnel", "backtrack", "evidence", "synthesis", "scoring", "verify",
                       "budgets", "providers", "ann", "cache_path"},
                   "");
    read(j, "dimension", c.dimension);
    read(j, "epsilon", c.epsilon);
    read(j, "seed", c.seed);
    if (j.contains("ingest")) {
        const auto& s = j.at("ingest");
        reject_unknown(s, {"segment_limit", "length_unit"}, "ingest");
        read(s, "segment_limit", c.ingest.segment_limit);
        read(s, "length_unit", c.ingest.length_unit);
    }
    if (j.contains("dedup")) {
        const auto& s = j.at("dedup");
        reject_unknown(s, {"merge_threshold"}, "dedup");
        read(s, "merge_threshold", c.dedup.merge_threshold);
    }
    if (j.contains("abstraction")) {
        const auto& s = j.at("abstraction");
        reject_unknown(s,
                       {"levels", "initial_clusters", "final_clusters", "min_clusters",
                        "rebuild_after", "batch_size", "max_iterations"},
                       "abstraction");
        read(s, "levels", c.abstraction.levels);
        read(s, "initial_clusters", c.abstraction.initial_clusters);
        read(s, "final_clusters", c.abstraction.final_clusters);
        read(s, "min_clusters", c.abstraction.min_clusters);
        read(s, "rebuild_after", c.abstraction.rebuild_after);
        read(s, "batch_size", c.abstraction.batch_size);
        read(s, "max_iterations", c.abstraction.max_iterations);
    }
    if (j.contains("funnel")) {
        const auto& s = j.at("funnel");
        reject_unknown(s, {"top_budget", "decay", "leaf_budget"}, "funnel");
        read(s, "top_budget", c.funnel.top_budget);
        read(s, "decay", c.funnel.decay);
        read(s, "leaf_budget", c.funnel.leaf_budget);
    }
    if (j.contains("backtrack")) {
        const auto& s = j.at("backtrack");
        reject_unknown(s, {"influence_threshold", "max_depth"}, "backtrack");
        read(s, "influence_threshold", c.backtrack.influence_threshold);
        read(s, "max_depth", c.backtrack.max_depth);
    }
    if (j.contains("evidence")) {
        const auto& s = j.at("evidence");
        reject_unknown(s, {"depth_min", "depth_range", "share_exponent"}, "evidence");
        read(s, "depth_min", c.evidence.depth_min);
        read(s, "depth_range", c.evidence.depth_range);
        read(s, "share_exponent", c.evidence.share_exponent);
    }
    if (j.contains("synthesis")) {
        const auto& s = j.at("synthesis");
        reject_unknown(s, {"candidates", "max_parents"}, "synthesis");
        read(s, "candidates", c.synthesis.candidates);
        read(s, "max_parents", c.synthesis.max_parents);
    }
    if (j.contains("scoring")) {
        const auto& s = j.at("scoring");
        reject_unknown(s, {"weights", "threshold", "clip", "gate_min_alignment"}, "scoring");
        if (s.contains("weights")) {
            const auto& w = s.at("weights");
            reject_unknown(w, {"novelty", "consistency", "usefulness", "explainability"},
                           "scoring.weights");
            read(w, "novelty", c.scoring.weights.novelty);
            read(w, "consistency", c.scoring.weights.consistency);
            read(w, "usefulness", c.scoring.weights.usefulness);
            read(w, "explainability", c.scoring.weights.explainability);
        }
        read(s, "threshold", c.scoring.threshold);
        read(s, "clip", c.scoring.clip);
        read(s, "gate_min_alignment", c.scoring.gate_min_alignment);
    }
    if (j.contains("verify")) {
        const auto& s = j.at("verify");
        reject_unknown(s, {"policy", "falsifier_period"}, "verify");
        read(s, "policy", c.verify.policy);
        read(s, "falsifier_period", c.verify.falsifier_period);
    }
    if (j.contains("budgets")) {
        const auto& s = j.at("budgets");
        reject_unknown(s, {"max_calls", "max_candidates"}, "budgets");
        read(s, "max_calls", c.budgets.max_calls);
        read(s, "max_candidates", c.budgets.max_candidates);
    }
    if (j.contains("providers")) {
        const auto& s = j.at("providers");
        reject_unknown(s,
                       {"embedder", "embed_endpoint", "extractor", "summarizer", "generator",
                        "scorer", "verifier"},
                       "providers");
        read(s, "embedder", c.providers.embedder);
        read(s, "embed_endpoint", c.providers.embed_endpoint);
        read(s, "extractor", c.providers.extractor);
        read(s, "summarizer", c.providers.summarizer);
        read(s, "generator", c.providers.generator);
        read(s, "scorer", c.providers.scorer);
        read(s, "verifier", c.providers.verifier);
    }
    if (j.contains("ann")) {
        const auto& s = j.at("ann");
        reject_unknown(s, {"enabled", "nlist", "nprobe"}, "ann");
        read(s, "enabled", c.ann.enabled);
        read(s, "nlist", c.ann.nlist);
        read(s, "nprobe", c.ann.nprobe);
    }
    read(j, "cache_path", c.cache_path);
    c.validate();
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

std::string Config::hash() const {
    return to_hex(fnv1a64(to_json().dump()));
}

void Config::apply_env_overrides() {
    if (const char* ep = std::getenv("METHODFORGE_EMBED_ENDPOINT")) {
        providers.embed_endpoint = ep;
        if (*ep) providers.embedder = "http";
    }
}

} // namespace forge
