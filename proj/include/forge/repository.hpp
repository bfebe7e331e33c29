#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/abstraction.hpp"
#include "forge/audit.hpp"
#include "forge/config.hpp"
#include "forge/core.hpp"
#include "forge/dedup.hpp"
#include "forge/embed.hpp"
#include "forge/funnel.hpp"
#include "forge/ingest.hpp"
#include "forge/provenance.hpp"

namespace forge {

struct QueryOverrides {
    std::optional<int> k1;
    std::optional<double> eta;
    std::optional<int> k_leaf;
    std::optional<double> tau;
    std::optional<int> max_depth;
};

// The whole engine state: canonical method nodes, contribution edges, the
// provenance backbone, the abstraction hierarchy, and the audit trail.
// Nodes and edges are append-only after the build; merges happen only inside
// the build itself.
class Repository {
public:
    Config config;
    std::uint64_t version = 0;
    std::vector<MethodNode> nodes;
    std::vector<ContributionEdge> edges;
    ProvenanceTree provenance;
    AbstractionTree abstraction;
    AuditLog audit;
    std::uint64_t next_node_id = 1;
    std::uint64_t next_candidate_id = 1;

    const MethodNode* find_node(NodeId id) const;
    MethodNode* find_node(NodeId id);

    std::map<std::string, std::size_t> status_histogram() const;

    // ingest -> extract -> dedup -> provenance -> abstraction -> indexes.
    static Repository build_from_corpus(const std::vector<Document>& docs, const Config& config,
                                        Embedder& embedder, Extractor& extractor,
                                        Summarizer& summarizer);

    // Funnel descent plus provenance backtracking, read-only.
    RetrievalContext run_query(const std::string& text, Embedder& embedder,
                               const QueryOverrides& overrides = {}) const;

    const SimilarityIndex& leaf_index() const;
    const SimilarityIndex& cluster_index() const;
    void rebuild_indexes();

    // Structural checks used by tests and on snapshot load: edge weight/rating
    // lockstep, unique (src,dst), backbone acyclicity, primary maximality,
    // partition validity, audit sequence integrity.
    void check_invariants() const;

private:
    std::unique_ptr<SimilarityIndex> leaf_index_;
    std::unique_ptr<SimilarityIndex> cluster_index_;
};

// Name/summary lookup handed to generators.
std::function<const MethodNode*(NodeId)> make_resolver(const Repository& repo);

} // namespace forge
