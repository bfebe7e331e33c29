#include "forge/dedup.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

#include "forge/util.hpp"

namespace forge {

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);  // keep the smaller index as root
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

MergePlan components_from_pairs(const std::vector<MethodNode>& nodes,
                                const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                double delta) {
    UnionFind uf(nodes.size());
    for (const auto& [a, b] : pairs) uf.unite(a, b);
    std::map<std::size_t, std::vector<NodeId>> groups;
    for (std::size_t i = 0; i < nodes.size(); ++i) groups[uf.find(i)].push_back(nodes[i].id);
    MergePlan plan;
    plan.delta = delta;
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        plan.components.push_back(std::move(members));
    }
    std::sort(plan.components.begin(), plan.components.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return plan;
}

void check_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw ValidationError("merge threshold must lie in (0,1), got " + std::to_string(delta));
}

} // namespace

MergePlan find_merges(const std::vector<MethodNode>& nodes, double delta) {
    check_delta(delta);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::mutex mu;
    parallel_chunks(nodes.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<std::size_t, std::size_t>> local;
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t j = i + 1; j < nodes.size(); ++j)
                if (cosine(nodes[i].embedding, nodes[j].embedding) > delta)
                    local.emplace_back(i, j);
        std::lock_guard<std::mutex> lock(mu);
        pairs.insert(pairs.end(), local.begin(), local.end());
    });
    return components_from_pairs(nodes, pairs, delta);
}

MergePlan find_merges(const std::vector<MethodNode>& nodes, double delta,
                      const SimilarityIndex& index, std::size_t probe_k) {
    check_delta(delta);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i].id] = i;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto neighbors = index.top_k(nodes[i].embedding, probe_k);
        for (const auto& [id, sim] : neighbors) {
            auto it = pos.find(id);
            if (it == pos.end() || it->second == i) continue;
            if (sim > delta) pairs.emplace_back(std::min(i, it->second), std::max(i, it->second));
        }
    }
    return components_from_pairs(nodes, pairs, delta);
}

MethodNode canonicalize(const std::vector<const MethodNode*>& component, Embedder& embedder) {
    if (component.empty()) throw ValidationError("canonicalize: empty component");
    std::vector<const MethodNode*> members = component;
    std::sort(members.begin(), members.end(),
              [](const MethodNode* a, const MethodNode* b) { return a->id < b->id; });

    MethodNode canon = *members.front();
    canon.merged_from.clear();
    canon.sources.clear();
    for (const auto* m : members) {
        if (m->id != canon.id) canon.merged_from.push_back(m->id);
        canon.sources.insert(canon.sources.end(), m->sources.begin(), m->sources.end());
    }
    canon.embedding = embedder.embed(embedding_text(canon.name, canon.summary, canon.keywords));
    return canon;
}

std::vector<ContributionEdge> remap_edges(const std::vector<ContributionEdge>& edges,
                                          const std::map<NodeId, NodeId>& mapping) {
    auto target = [&](NodeId id) {
        auto it = mapping.find(id);
        return it == mapping.end() ? id : it->second;
    };
    // Deterministic grouping: first-seen order of each canonical (src, dst).
    std::map<std::pair<NodeId, NodeId>, std::size_t> slot;
    std::vector<ContributionEdge> out;
    for (const auto& e : edges) {
        NodeId src = target(e.src);
        NodeId dst = target(e.dst);
        if (src == dst) continue;  // collapsed into a self-loop
        auto key = std::make_pair(src, dst);
        auto it = slot.find(key);
        if (it == slot.end()) {
            ContributionEdge copy = e;
            copy.src = src;
            copy.dst = dst;
            slot.emplace(key, out.size());
            out.push_back(std::move(copy));
        } else {
            ContributionEdge& kept = out[it->second];
            if (e.weight > kept.weight) {
                kept.rating = e.rating;
                kept.weight = e.weight;
                kept.share = e.share;
            }
            if (!e.explanation.empty()) {
                if (!kept.explanation.empty()) kept.explanation += " | ";
                kept.explanation += e.explanation;
            }
        }
    }
    return out;
}

DedupResult dedup_corpus(std::vector<MethodNode> nodes, std::vector<ContributionEdge> edges,
                         double delta, Embedder& embedder) {
    MergePlan plan = find_merges(nodes, delta);
    std::map<NodeId, const MethodNode*> by_id;
    for (const auto& n : nodes) by_id[n.id] = &n;

    DedupResult result;
    for (const auto& component : plan.components) {
        std::vector<const MethodNode*> members;
        members.reserve(component.size());
        for (NodeId id : component) members.push_back(by_id.at(id));
        if (component.size() == 1) {
            result.nodes.push_back(*members.front());
            continue;
        }
        MethodNode canon = canonicalize(members, embedder);
        for (NodeId id : component)
            if (id != canon.id) result.mapping[id] = canon.id;
        MergeEvent ev;
        ev.members = component;
        ev.canonical = canon.id;
        ev.delta = delta;
        result.merges.push_back(std::move(ev));
        result.nodes.push_back(std::move(canon));
    }
    result.edges = remap_edges(edges, result.mapping);
    return result;
}

} // namespace forge
