#pragma once

/*
 * Weighted provenance over contribution edges.
 *
 * The backbone keeps exactly one primary parent per non-root node: the
 * highest-weight incoming edge that does not close a cycle. A displaced
 * heavier edge stays as a supporting edge with its `demoted` flag set, which
 * is the only sanctioned way a supporting edge may outweigh the primary.
 */

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forge/core.hpp"

namespace forge {

struct ParentLink {
    NodeId parent = 0;
    double weight = 0.0;
    std::optional<double> share;
};

struct SupportLink {
    NodeId parent = 0;
    double weight = 0.0;
    bool demoted = false;
};

struct DemotionEvent {
    NodeId src = 0;
    NodeId dst = 0;
    double weight = 0.0;
};

class ProvenanceTree {
public:
    // Selects primaries from scratch. Nodes are processed in ascending id;
    // candidate parents per node in (weight desc, src asc) order; an edge that
    // would close a backbone cycle is demoted and the next one tried. Edge
    // kinds and demotion flags are written back into `edges`. At most one
    // edge per (src, dst) pair; self-loops are integrity errors.
    static ProvenanceTree build(const std::vector<NodeId>& nodes,
                                std::vector<ContributionEdge>& edges,
                                std::vector<DemotionEvent>* demotions = nullptr);

    // Trusts the kinds already stored on the edges (snapshot load path).
    static ProvenanceTree from_edges(const std::vector<NodeId>& nodes,
                                     const std::vector<ContributionEdge>& edges);

    // Write-back path: node is brand new, every edge points into it, so no
    // cycle can form. Primary = highest share, then smaller src. Kinds are
    // stamped on the given edges.
    void attach_new_node(NodeId node, std::vector<ContributionEdge>& incoming);

    bool has_node(NodeId id) const { return nodes_.count(id) > 0; }
    bool is_root(NodeId id) const;
    std::optional<ParentLink> primary(NodeId id) const;
    const std::vector<SupportLink>& supporting(NodeId id) const;
    const std::set<NodeId>& node_ids() const { return nodes_; }
    std::size_t node_count() const { return nodes_.size(); }

    // Depth of the primary chain above `id` (root: 0).
    int chain_depth(NodeId id) const;
    bool backbone_acyclic() const;

    // Primary weight >= weight of every supporting edge that is not demoted.
    bool primary_maximal() const;

private:
    std::set<NodeId> nodes_;
    std::map<NodeId, ParentLink> primary_;
    std::map<NodeId, std::vector<SupportLink>> supporting_;
    static const std::vector<SupportLink> kNoSupport;
};

// Cumulative influence walk up the primary chain from `leaf`. Depth d has
// influence I_d = prod_{l<=d} min(w_l + epsilon, 1); an ancestor is included
// while d <= max_depth and I_d >= tau. The walk stops at the first failure or
// at a root. Every decision (including the stopping one) can be logged.
std::vector<AncestorHit> backtrack(const ProvenanceTree& tree, NodeId leaf, double tau,
                                   int max_depth, double epsilon,
                                   std::vector<BacktrackStep>* log = nullptr);

// Depth budget from an attribution share: d_min + floor(d_range * share^gamma).
int adaptive_depth(double share, int d_min, int d_range, double gamma);

// Fills ctx.ancestors (and ctx.backtrack) from ctx.leaves. A shared ancestor
// keeps its maximum-influence entry; order is influence desc, then id asc.
void collect_context(const ProvenanceTree& tree, RetrievalContext& ctx, double tau,
                     int max_depth, double epsilon);

// Graphviz rendering; solid = primary, dashed = supporting.
std::string provenance_dot(const std::vector<MethodNode>& nodes,
                           const std::vector<ContributionEdge>& edges);

} // namespace forge
