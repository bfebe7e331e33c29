#include "forge/provenance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "forge/util.hpp"

namespace forge {

const std::vector<SupportLink> ProvenanceTree::kNoSupport{};

namespace {

// True if starting from `from` the current primary chain reaches `target`.
bool chain_reaches(const std::map<NodeId, ParentLink>& primary, NodeId from, NodeId target) {
    NodeId cur = from;
    while (true) {
        if (cur == target) return true;
        auto it = primary.find(cur);
        if (it == primary.end()) return false;
        cur = it->second.parent;
    }
}

} // namespace

ProvenanceTree ProvenanceTree::build(const std::vector<NodeId>& nodes,
                                     std::vector<ContributionEdge>& edges,
                                     std::vector<DemotionEvent>* demotions) {
    ProvenanceTree tree;
    for (NodeId id : nodes) {
        if (!tree.nodes_.insert(id).second)
            throw IntegrityError("duplicate node id " + std::to_string(id));
    }

    std::set<std::pair<NodeId, NodeId>> seen;
    std::map<NodeId, std::vector<std::size_t>> incoming;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.src == e.dst)
            throw IntegrityError("self-loop on node " + std::to_string(e.src));
        if (!tree.nodes_.count(e.src) || !tree.nodes_.count(e.dst))
            throw IntegrityError("edge endpoint outside node set: " + std::to_string(e.src) +
                                 " -> " + std::to_string(e.dst));
        if (!seen.insert({e.src, e.dst}).second)
            throw IntegrityError("parallel edge " + std::to_string(e.src) + " -> " +
                                 std::to_string(e.dst));
        edges[i].kind = EdgeKind::supporting;
        edges[i].demoted = false;
        incoming[e.dst].push_back(i);
    }

    for (NodeId node : tree.nodes_) {
        auto it = incoming.find(node);
        if (it == incoming.end()) continue;  // root
        auto& candidates = it->second;
        std::sort(candidates.begin(), candidates.end(), [&edges](std::size_t a, std::size_t b) {
            if (edges[a].weight != edges[b].weight) return edges[a].weight > edges[b].weight;
            return edges[a].src < edges[b].src;
        });
        bool placed = false;
        for (std::size_t idx : candidates) {
            if (chain_reaches(tree.primary_, edges[idx].src, node)) {
                edges[idx].demoted = true;
                if (demotions)
                    demotions->push_back({edges[idx].src, edges[idx].dst, edges[idx].weight});
                continue;
            }
            edges[idx].kind = EdgeKind::primary;
            tree.primary_[node] = ParentLink{edges[idx].src, edges[idx].weight, edges[idx].share};
            placed = true;
            break;
        }
        (void)placed;  // all candidates demoted: the node stays a root
    }

    for (const auto& e : edges)
        if (e.kind == EdgeKind::supporting)
            tree.supporting_[e.dst].push_back({e.src, e.weight, e.demoted});
    for (auto& [id, links] : tree.supporting_)
        std::sort(links.begin(), links.end(), [](const SupportLink& a, const SupportLink& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.parent < b.parent;
        });
    return tree;
}

ProvenanceTree ProvenanceTree::from_edges(const std::vector<NodeId>& nodes,
                                          const std::vector<ContributionEdge>& edges) {
    ProvenanceTree tree;
    for (NodeId id : nodes) tree.nodes_.insert(id);
    for (const auto& e : edges) {
        if (!tree.nodes_.count(e.src) || !tree.nodes_.count(e.dst))
            throw IntegrityError("edge endpoint outside node set: " + std::to_string(e.src) +
                                 " -> " + std::to_string(e.dst));
        if (e.kind == EdgeKind::primary) {
            if (tree.primary_.count(e.dst))
                throw IntegrityError("two primary edges into node " + std::to_string(e.dst));
            tree.primary_[e.dst] = ParentLink{e.src, e.weight, e.share};
        } else {
            tree.supporting_[e.dst].push_back({e.src, e.weight, e.demoted});
        }
    }
    if (!tree.backbone_acyclic()) throw IntegrityError("stored backbone contains a cycle");
    return tree;
}

void ProvenanceTree::attach_new_node(NodeId node, std::vector<ContributionEdge>& incoming) {
    if (nodes_.count(node)) throw IntegrityError("node already present: " + std::to_string(node));
    for (const auto& e : incoming) {
        if (e.dst != node) throw IntegrityError("attach: edge not pointing at new node");
        if (!nodes_.count(e.src))
            throw ConflictError("attach: unknown parent " + std::to_string(e.src));
    }
    nodes_.insert(node);
    if (incoming.empty()) return;
    std::size_t best = 0;
    for (std::size_t i = 1; i < incoming.size(); ++i) {
        double a = incoming[i].share.value_or(incoming[i].weight);
        double b = incoming[best].share.value_or(incoming[best].weight);
        if (a > b || (a == b && incoming[i].src < incoming[best].src)) best = i;
    }
    for (std::size_t i = 0; i < incoming.size(); ++i) {
        incoming[i].demoted = false;
        incoming[i].kind = i == best ? EdgeKind::primary : EdgeKind::supporting;
        if (i == best)
            primary_[node] = ParentLink{incoming[i].src, incoming[i].weight, incoming[i].share};
        else
            supporting_[node].push_back({incoming[i].src, incoming[i].weight, false});
    }
}

bool ProvenanceTree::is_root(NodeId id) const {
    if (!nodes_.count(id)) throw NotFoundError("unknown node " + std::to_string(id));
    return primary_.find(id) == primary_.end();
}

std::optional<ParentLink> ProvenanceTree::primary(NodeId id) const {
    if (!nodes_.count(id)) throw NotFoundError("unknown node " + std::to_string(id));
    auto it = primary_.find(id);
    if (it == primary_.end()) return std::nullopt;
    return it->second;
}

const std::vector<SupportLink>& ProvenanceTree::supporting(NodeId id) const {
    auto it = supporting_.find(id);
    return it == supporting_.end() ? kNoSupport : it->second;
}

int ProvenanceTree::chain_depth(NodeId id) const {
    int depth = 0;
    NodeId cur = id;
    std::size_t guard = 0;
    while (true) {
        auto it = primary_.find(cur);
        if (it == primary_.end()) return depth;
        cur = it->second.parent;
        ++depth;
        if (++guard > nodes_.size())
            throw IntegrityError("primary chain cycle at node " + std::to_string(id));
    }
}

bool ProvenanceTree::backbone_acyclic() const {
    for (NodeId id : nodes_) {
        NodeId cur = id;
        std::size_t steps = 0;
        while (true) {
            auto it = primary_.find(cur);
            if (it == primary_.end()) break;
            cur = it->second.parent;
            if (++steps > nodes_.size()) return false;
        }
    }
    return true;
}

bool ProvenanceTree::primary_maximal() const {
    for (const auto& [node, link] : primary_) {
        for (const auto& s : supporting(node))
            if (!s.demoted && s.weight > link.weight) return false;
    }
    return true;
}

std::vector<AncestorHit> backtrack(const ProvenanceTree& tree, NodeId leaf, double tau,
                                   int max_depth, double epsilon,
                                   std::vector<BacktrackStep>* log) {
    if (!(tau > 0.0 && tau < 1.0))
        throw ValidationError("influence threshold must lie in (0,1)");
    if (max_depth < 0) throw ValidationError("max depth must be non-negative");
    if (epsilon < 0.0) throw ValidationError("epsilon must be non-negative");
    if (!tree.has_node(leaf)) throw NotFoundError("unknown leaf " + std::to_string(leaf));

    std::vector<AncestorHit> hits;
    double influence = 1.0;
    NodeId cur = leaf;
    int depth = 0;
    while (true) {
        auto link = tree.primary(cur);
        if (!link) break;  // reached a root
        ++depth;
        influence *= std::min(link->weight + epsilon, 1.0);
        BacktrackStep step;
        step.leaf = leaf;
        step.depth = depth;
        step.ancestor = link->parent;
        step.influence = influence;
        if (depth > max_depth) {
            step.included = false;
            step.reason = "depth " + std::to_string(depth) + " exceeds limit " +
                          std::to_string(max_depth);
            if (log) log->push_back(std::move(step));
            break;
        }
        if (influence < tau) {
            step.included = false;
            step.reason = "influence below threshold";
            if (log) log->push_back(std::move(step));
            break;
        }
        step.included = true;
        step.reason = "within depth and influence bounds";
        if (log) log->push_back(std::move(step));
        hits.push_back(AncestorHit{link->parent, leaf, depth, influence});
        cur = link->parent;
    }
    return hits;
}

int adaptive_depth(double share, int d_min, int d_range, double gamma) {
    if (!(share >= 0.0 && share <= 1.0))
        throw ValidationError("share must lie in [0,1]");
    if (d_min < 0 || d_range < 0) throw ValidationError("depth parameters must be non-negative");
    if (!(gamma > 0.0)) throw ValidationError("share exponent must be positive");
    return d_min + static_cast<int>(std::floor(static_cast<double>(d_range) *
                                               std::pow(share, gamma)));
}

void collect_context(const ProvenanceTree& tree, RetrievalContext& ctx, double tau,
                     int max_depth, double epsilon) {
    ctx.ancestors.clear();
    ctx.backtrack.clear();
    std::map<NodeId, AncestorHit> best;
    for (const auto& [leaf, sim] : ctx.leaves) {
        auto hits = backtrack(tree, leaf, tau, max_depth, epsilon, &ctx.backtrack);
        for (const auto& hit : hits) {
            auto it = best.find(hit.ancestor);
            if (it == best.end()) {
                best.emplace(hit.ancestor, hit);
            } else if (hit.influence > it->second.influence) {
                it->second = hit;  // strictly better; ties keep the earlier leaf
            }
        }
    }
    for (const auto& [id, hit] : best) ctx.ancestors.push_back(hit);
    std::sort(ctx.ancestors.begin(), ctx.ancestors.end(),
              [](const AncestorHit& a, const AncestorHit& b) {
                  if (a.influence != b.influence) return a.influence > b.influence;
                  return a.ancestor < b.ancestor;
              });
}

std::string provenance_dot(const std::vector<MethodNode>& nodes,
                           const std::vector<ContributionEdge>& edges) {
    std::ostringstream out;
    out << "digraph provenance {\n  rankdir=BT;\n";
    std::vector<const MethodNode*> sorted;
    for (const auto& n : nodes) sorted.push_back(&n);
    std::sort(sorted.begin(), sorted.end(),
              [](const MethodNode* a, const MethodNode* b) { return a->id < b->id; });
    for (const auto* n : sorted) {
        out << "  m" << n->id << " [label=\"" << n->name << "\\n(" << to_string(n->status)
            << ")\"];\n";
    }
    std::vector<const ContributionEdge*> es;
    for (const auto& e : edges) es.push_back(&e);
    std::sort(es.begin(), es.end(), [](const ContributionEdge* a, const ContributionEdge* b) {
        if (a->dst != b->dst) return a->dst < b->dst;
        return a->src < b->src;
    });
    for (const auto* e : es) {
        out << "  m" << e->src << " -> m" << e->dst << " [label=\"" << format_fixed(e->weight, 2)
            << "\"";
        if (e->kind == EdgeKind::supporting) out << " style=dashed";
        if (e->demoted) out << " color=gray";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace forge
