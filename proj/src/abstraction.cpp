#include "forge/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "forge/util.hpp"

namespace forge {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t level) {
    return seed + level * 0x9e3779b97f4a7c15ULL;
}

// Values within 1e-9 of an integer count as that integer before ceil. Keeps
// the geometric schedule stable when rho^(t-1) lands on an exact ratio.
int ceil_snapped(double x) {
    double r = std::round(x);
    if (std::abs(x - r) < 1e-9) return static_cast<int>(r);
    return static_cast<int>(std::ceil(x));
}

double sq_dist(const Vec& a, const Vec& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = static_cast<double>(a[i]) - b[i];
        d += diff * diff;
    }
    return d;
}

} // namespace

ClusterSchedule make_schedule(std::size_t leaf_count, int levels, int k1, int kn, int kmin) {
    if (levels < 1) throw ValidationError("schedule needs at least one level");
    if (kmin < 1) throw ValidationError("minimum cluster count must be positive");
    if (leaf_count == 0) throw ValidationError("schedule needs at least one leaf");

    long n = static_cast<long>(leaf_count);
    if (k1 == 0) k1 = ceil_snapped(std::sqrt(static_cast<double>(n)));
    k1 = static_cast<int>(std::min<long>(k1, n));
    if (kn == 0) kn = std::clamp(ceil_snapped(static_cast<double>(k1) / 4.0), 5, 20);
    kn = std::min(kn, k1);

    if (k1 < 1 || kn < 1)
        throw ValidationError("cluster counts must be positive");
    if (kn > k1)
        throw ValidationError("top-level cluster count " + std::to_string(kn) +
                              " exceeds first-level count " + std::to_string(k1));
    if (static_cast<long>(k1) > n)
        throw ValidationError("first-level cluster count exceeds leaf count");

    ClusterSchedule s;
    s.levels = levels;
    s.k1 = k1;
    s.kn = kn;
    s.kmin = kmin;
    if (levels == 1 || kn == k1) {
        s.rho = 1.0;
    } else {
        s.rho = std::pow(static_cast<double>(kn) / k1, 1.0 / static_cast<double>(levels - 1));
    }
    for (int t = 1; t <= levels; ++t) {
        double raw = k1 * std::pow(static_cast<double>(kn) / k1,
                                   levels == 1 ? 0.0
                                               : static_cast<double>(t - 1) / (levels - 1));
        s.counts.push_back(std::max(kmin, ceil_snapped(raw)));
    }
    for (std::size_t t = 1; t < s.counts.size(); ++t)
        if (s.counts[t] > s.counts[t - 1])
            throw IntegrityError("cluster schedule is not non-increasing");
    return s;
}

std::string StubSummarizer::summarize(const std::vector<SummaryMember>& members) {
    if (members.empty()) throw ValidationError("summarize: empty cluster");
    for (const auto& m : members)
        if (m.embedding == nullptr) throw ValidationError("summarize: member without embedding");

    std::size_t medoid = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j)
            if (j != i) total += sq_dist(*members[i].embedding, *members[j].embedding);
        if (total < best || (total == best && members[i].id < members[medoid].id)) {
            best = total;
            medoid = i;
        }
    }

    std::map<std::string, std::size_t> freq;
    for (const auto& m : members)
        for (const auto& kw : m.keywords) freq[kw] += 1;
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::string prefix;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
        if (!prefix.empty()) prefix.push_back(' ');
        prefix += ranked[i].first;
    }
    if (prefix.empty()) return members[medoid].summary;
    return "[" + prefix + "] " + members[medoid].summary;
}

std::vector<std::vector<std::uint64_t>> cluster_level(const std::vector<std::uint64_t>& ids,
                                                      const std::vector<Vec>& vectors,
                                                      std::size_t k, std::uint64_t seed,
                                                      const ClusterParams& params) {
    if (ids.size() != vectors.size())
        throw ValidationError("cluster_level: ids and vectors must align");
    if (ids.empty()) throw ValidationError("cluster_level: empty item set");
    KMeansParams kp;
    kp.batch_size = params.batch_size;
    kp.max_iterations = params.max_iterations;
    auto partition = minibatch_kmeans(vectors, std::min(k, ids.size()), seed, kp);
    std::vector<std::vector<std::uint64_t>> out;
    out.reserve(partition.size());
    for (const auto& members : partition) {
        std::vector<std::uint64_t> group;
        group.reserve(members.size());
        for (std::size_t pos : members) group.push_back(ids[pos]);
        std::sort(group.begin(), group.end());
        out.push_back(std::move(group));
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

void AbstractionTree::index_cluster(const ClusterNode& node) {
    clusters_[node.id] = node;
    if (node.level == 1)
        for (std::uint64_t child : node.children) leaf_home_[child] = node.id;
    else
        for (std::uint64_t child : node.children) parent_[child] = node.id;
}

AbstractionTree AbstractionTree::build(const std::vector<MethodNode>& leaves,
                                       const ClusterSchedule& schedule, std::uint64_t seed,
                                       Summarizer& summarizer, Embedder& embedder,
                                       const ClusterParams& params,
                                       std::uint64_t first_cluster_id) {
    AbstractionTree tree;
    tree.schedule_ = schedule;
    tree.next_cluster_id_ = first_cluster_id;
    if (leaves.empty()) return tree;

    std::vector<const MethodNode*> sorted;
    sorted.reserve(leaves.size());
    for (const auto& n : leaves) sorted.push_back(&n);
    std::sort(sorted.begin(), sorted.end(),
              [](const MethodNode* a, const MethodNode* b) { return a->id < b->id; });

    std::map<std::uint64_t, const MethodNode*> by_id;
    std::vector<std::uint64_t> ids;
    std::vector<Vec> vectors;
    for (const auto* n : sorted) {
        by_id[n->id] = n;
        ids.push_back(n->id);
        vectors.push_back(n->embedding);
    }

    for (int t = 1; t <= schedule.levels; ++t) {
        std::size_t want = static_cast<std::size_t>(schedule.counts[t - 1]);
        auto partition = cluster_level(ids, vectors, want, mix_seed(seed, t), params);

        std::vector<std::uint64_t> next_ids;
        std::vector<Vec> next_vectors;
        std::vector<ClusterId> layer;
        for (const auto& group : partition) {
            ClusterNode node;
            node.id = tree.next_cluster_id_++;
            node.level = t;
            node.children = group;

            std::vector<SummaryMember> members;
            members.reserve(group.size());
            for (std::uint64_t child : group) {
                SummaryMember m;
                m.id = child;
                if (t == 1) {
                    const MethodNode* leaf = by_id.at(child);
                    m.summary = leaf->summary;
                    m.keywords = leaf->keywords;
                    m.embedding = &leaf->embedding;
                } else {
                    const ClusterNode& c = tree.clusters_.at(child);
                    m.summary = c.summary;
                    m.keywords = tokenize(c.summary);
                    m.embedding = &c.summary_embedding;
                }
                members.push_back(std::move(m));
            }
            node.summary = summarizer.summarize(members);
            node.summary_embedding = embedder.embed(node.summary);
            layer.push_back(node.id);
            next_ids.push_back(node.id);
            next_vectors.push_back(node.summary_embedding);
            tree.index_cluster(node);
        }
        tree.levels_.push_back(std::move(layer));
        ids = std::move(next_ids);
        vectors = std::move(next_vectors);
    }
    return tree;
}

const std::vector<ClusterId>& AbstractionTree::level(int t) const {
    if (t < 1 || t > static_cast<int>(levels_.size()))
        throw NotFoundError("no cluster level " + std::to_string(t));
    return levels_[static_cast<std::size_t>(t - 1)];
}

const ClusterNode& AbstractionTree::cluster(ClusterId id) const {
    auto it = clusters_.find(id);
    if (it == clusters_.end()) throw NotFoundError("unknown cluster " + std::to_string(id));
    return it->second;
}

std::optional<ClusterId> AbstractionTree::parent_of(ClusterId id) const {
    auto it = parent_.find(id);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
}

ClusterId AbstractionTree::leaf_cluster_of(NodeId leaf) const {
    auto it = leaf_home_.find(leaf);
    if (it == leaf_home_.end()) throw NotFoundError("leaf not in tree: " + std::to_string(leaf));
    return it->second;
}

ClusterId AbstractionTree::top_cluster_of(NodeId leaf) const {
    ClusterId cur = leaf_cluster_of(leaf);
    while (auto p = parent_of(cur)) cur = *p;
    return cur;
}

std::vector<ClusterId> AbstractionTree::path_to_leaf(NodeId leaf) const {
    std::vector<ClusterId> path;
    ClusterId cur = leaf_cluster_of(leaf);
    path.push_back(cur);
    while (auto p = parent_of(cur)) {
        cur = *p;
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<NodeId> AbstractionTree::leaves_under(ClusterId id) const {
    const ClusterNode& node = cluster(id);
    std::vector<NodeId> out;
    if (node.level == 1) {
        out.assign(node.children.begin(), node.children.end());
    } else {
        for (std::uint64_t child : node.children) {
            auto sub = leaves_under(child);
            out.insert(out.end(), sub.begin(), sub.end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<const ClusterNode*> AbstractionTree::all_clusters() const {
    std::vector<const ClusterNode*> out;
    out.reserve(clusters_.size());
    for (const auto& [id, node] : clusters_) out.push_back(&node);
    return out;
}

void AbstractionTree::mark_stale_chain(ClusterId id) {
    stale_.insert(id);
    ClusterId cur = id;
    while (auto p = parent_of(cur)) {
        cur = *p;
        stale_.insert(cur);
    }
}

bool AbstractionTree::insert_leaf(const MethodNode& leaf, std::size_t rebuild_after) {
    if (rebuild_after == 0) throw ValidationError("rebuild period must be positive");
    if (leaf_home_.count(leaf.id))
        throw IntegrityError("leaf already in tree: " + std::to_string(leaf.id));

    if (levels_.empty() || leaf_home_.empty()) {
        // Bootstrap a one-cluster spine so the funnel has a full path.
        levels_.assign(static_cast<std::size_t>(schedule_.levels), {});
        clusters_.clear();
        parent_.clear();
        leaf_home_.clear();
        stale_.clear();
        std::uint64_t below = 0;
        for (int t = 1; t <= schedule_.levels; ++t) {
            ClusterNode node;
            node.id = next_cluster_id_++;
            node.level = t;
            node.children = {t == 1 ? leaf.id : below};
            levels_[static_cast<std::size_t>(t - 1)] = {node.id};
            index_cluster(node);
            stale_.insert(node.id);
            below = node.id;
        }
        ++insertions_since_rebuild_;
        return insertions_since_rebuild_ >= rebuild_after;
    }

    ClusterId best = 0;
    double best_sim = -2.0;
    for (ClusterId cid : levels_[0]) {
        const ClusterNode& node = clusters_.at(cid);
        double sim = node.summary_embedding.empty()
                         ? -1.0
                         : cosine(leaf.embedding, node.summary_embedding);
        if (sim > best_sim || (sim == best_sim && (best == 0 || cid < best))) {
            best_sim = sim;
            best = cid;
        }
    }
    auto& children = clusters_.at(best).children;
    children.insert(std::upper_bound(children.begin(), children.end(), leaf.id), leaf.id);
    leaf_home_[leaf.id] = best;
    mark_stale_chain(best);
    ++insertions_since_rebuild_;
    return insertions_since_rebuild_ >= rebuild_after;
}

void AbstractionTree::refresh(const std::vector<MethodNode>& leaves, Summarizer& summarizer,
                              Embedder& embedder) {
    if (stale_.empty()) return;
    std::map<NodeId, const MethodNode*> by_id;
    for (const auto& n : leaves) by_id[n.id] = &n;

    for (std::size_t t = 0; t < levels_.size(); ++t) {
        for (ClusterId cid : levels_[t]) {
            if (!stale_.count(cid)) continue;
            ClusterNode& node = clusters_.at(cid);
            std::vector<SummaryMember> members;
            members.reserve(node.children.size());
            for (std::uint64_t child : node.children) {
                SummaryMember m;
                m.id = child;
                if (node.level == 1) {
                    auto it = by_id.find(child);
                    if (it == by_id.end())
                        throw IntegrityError("cluster references unknown leaf " +
                                             std::to_string(child));
                    m.summary = it->second->summary;
                    m.keywords = it->second->keywords;
                    m.embedding = &it->second->embedding;
                } else {
                    const ClusterNode& c = clusters_.at(child);
                    m.summary = c.summary;
                    m.keywords = tokenize(c.summary);
                    m.embedding = &c.summary_embedding;
                }
                members.push_back(std::move(m));
            }
            node.summary = summarizer.summarize(members);
            node.summary_embedding = embedder.embed(node.summary);
        }
    }
    stale_.clear();
}

void AbstractionTree::validate_partition() const {
    if (levels_.empty()) {
        if (!clusters_.empty()) throw IntegrityError("clusters without levels");
        return;
    }
    // Level 1 must partition the leaves.
    std::set<std::uint64_t> seen;
    for (ClusterId cid : levels_[0]) {
        const ClusterNode& node = cluster(cid);
        if (node.level != 1) throw IntegrityError("level mix-up in layer 1");
        if (node.children.empty()) throw IntegrityError("empty cluster " + std::to_string(cid));
        for (std::uint64_t child : node.children)
            if (!seen.insert(child).second)
                throw IntegrityError("leaf " + std::to_string(child) + " in two clusters");
    }
    if (seen.size() != leaf_home_.size())
        throw IntegrityError("level 1 does not cover all leaves");
    for (const auto& [leaf, home] : leaf_home_)
        if (!seen.count(leaf)) throw IntegrityError("leaf missing from level 1");

    for (std::size_t t = 1; t < levels_.size(); ++t) {
        std::set<std::uint64_t> prev(levels_[t - 1].begin(), levels_[t - 1].end());
        std::set<std::uint64_t> covered;
        for (ClusterId cid : levels_[t]) {
            const ClusterNode& node = cluster(cid);
            if (node.level != static_cast<int>(t + 1))
                throw IntegrityError("level mix-up in layer " + std::to_string(t + 1));
            if (node.children.empty())
                throw IntegrityError("empty cluster " + std::to_string(cid));
            for (std::uint64_t child : node.children) {
                if (!prev.count(child))
                    throw IntegrityError("cluster " + std::to_string(cid) +
                                         " references foreign child " + std::to_string(child));
                if (!covered.insert(child).second)
                    throw IntegrityError("cluster child " + std::to_string(child) +
                                         " has two parents");
            }
        }
        if (covered.size() != prev.size())
            throw IntegrityError("layer " + std::to_string(t + 1) +
                                 " does not cover layer " + std::to_string(t));
    }
}

AbstractionTree AbstractionTree::restore(const std::vector<ClusterNode>& clusters,
                                         const ClusterSchedule& schedule,
                                         std::uint64_t next_cluster_id,
                                         std::size_t insertions_since_rebuild) {
    AbstractionTree tree;
    tree.schedule_ = schedule;
    tree.next_cluster_id_ = next_cluster_id;
    tree.insertions_since_rebuild_ = insertions_since_rebuild;
    int max_level = 0;
    for (const auto& c : clusters) max_level = std::max(max_level, c.level);
    tree.levels_.assign(static_cast<std::size_t>(max_level), {});
    std::vector<const ClusterNode*> sorted;
    for (const auto& c : clusters) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(),
              [](const ClusterNode* a, const ClusterNode* b) { return a->id < b->id; });
    for (const auto* c : sorted) {
        if (c->level < 1 || c->level > max_level)
            throw IntegrityError("cluster with invalid level " + std::to_string(c->level));
        tree.levels_[static_cast<std::size_t>(c->level - 1)].push_back(c->id);
        tree.index_cluster(*c);
    }
    tree.validate_partition();
    return tree;
}

std::string AbstractionTree::dot(const std::vector<MethodNode>& leaves) const {
    std::map<NodeId, const MethodNode*> by_id;
    for (const auto& n : leaves) by_id[n.id] = &n;
    std::ostringstream out;
    out << "digraph abstraction {\n  rankdir=TB;\n";
    for (const auto& [id, node] : clusters_) {
        out << "  c" << id << " [shape=box label=\"L" << node.level << " c" << id << "\"];\n";
    }
    for (const auto& [id, node] : clusters_) {
        for (std::uint64_t child : node.children) {
            if (node.level == 1) {
                out << "  c" << id << " -> m" << child << ";\n";
            } else {
                out << "  c" << id << " -> c" << child << ";\n";
            }
        }
    }
    std::vector<NodeId> leaf_ids;
    for (const auto& [leaf, home] : leaf_home_) leaf_ids.push_back(leaf);
    std::sort(leaf_ids.begin(), leaf_ids.end());
    for (NodeId id : leaf_ids) {
        auto it = by_id.find(id);
        std::string label = it == by_id.end() ? ("m" + std::to_string(id)) : it->second->name;
        out << "  m" << id << " [label=\"" << label << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace forge
