#pragma once

#include <map>
#include <vector>

#include "forge/core.hpp"
#include "forge/embed.hpp"

namespace forge {

// Connected components of the similarity graph with an edge wherever
// cosine > delta (strictly). Singletons are included. Members ascend by id;
// components are ordered by their smallest member.
struct MergePlan {
    std::vector<std::vector<NodeId>> components;
    double delta = 0.0;
};

MergePlan find_merges(const std::vector<MethodNode>& nodes, double delta);

// ANN-assisted variant: candidate pairs come from probing `index` with each
// node (probe_k neighbors), then the same strict filter applies. Misses in
// the candidate stage can split components; exactness is mode-dependent.
MergePlan find_merges(const std::vector<MethodNode>& nodes, double delta,
                      const SimilarityIndex& index, std::size_t probe_k);

// Collapses one component onto its smallest-id member. Sources concatenate in
// member-id order (duplicates kept, so source counts are conserved);
// merged_from lists the absorbed ids; the embedding is recomputed from the
// canonical text.
MethodNode canonicalize(const std::vector<const MethodNode*>& component, Embedder& embedder);

// Rewrites endpoints through `mapping` (identity where absent), drops edges
// that became self-loops, and merges parallel edges keeping the maximum
// weight; explanations of merged edges concatenate in input order.
std::vector<ContributionEdge> remap_edges(const std::vector<ContributionEdge>& edges,
                                          const std::map<NodeId, NodeId>& mapping);

struct MergeEvent {
    std::vector<NodeId> members;
    NodeId canonical = 0;
    double delta = 0.0;
};

struct DedupResult {
    std::vector<MethodNode> nodes;
    std::vector<ContributionEdge> edges;
    std::map<NodeId, NodeId> mapping;   // old id -> canonical id (non-identity only)
    std::vector<MergeEvent> merges;
};

// find_merges + canonicalize + remap_edges as one pass.
DedupResult dedup_corpus(std::vector<MethodNode> nodes, std::vector<ContributionEdge> edges,
                         double delta, Embedder& embedder);

} // namespace forge
