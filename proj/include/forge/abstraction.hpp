#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forge/core.hpp"
#include "forge/embed.hpp"
#include "forge/kmeans.hpp"

namespace forge {

struct ClusterSchedule {
    int levels = 1;       // n
    int k1 = 1;           // clusters at level 1 (clusters of leaves)
    int kn = 1;           // clusters at the top level
    int kmin = 1;
    double rho = 1.0;     // geometric decay; 1 when levels == 1 or kn == k1
    std::vector<int> counts;  // counts[t-1] = K_t
};

// Geometric schedule K_t = max(kmin, ceil(k1 * rho^(t-1))) with
// rho = (kn/k1)^(1/(n-1)). Pass k1 = 0 or kn = 0 to derive defaults from the
// leaf count: k1 = ceil(sqrt(N)), kn = clamp(ceil(k1/4), 5, 20), both capped
// to stay feasible. Requires 1 <= kn <= k1 <= leaf_count after derivation.
ClusterSchedule make_schedule(std::size_t leaf_count, int levels, int k1, int kn, int kmin);

struct SummaryMember {
    std::uint64_t id = 0;
    std::string summary;
    std::vector<std::string> keywords;
    const Vec* embedding = nullptr;
};

class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual std::string id() const = 0;
    virtual std::string summarize(const std::vector<SummaryMember>& members) = 0;
};

// Medoid member's summary prefixed with the three most frequent keyword
// tokens. Medoid = smallest total squared distance to the other members,
// ties toward the smaller id; keyword ties break lexicographically.
class StubSummarizer : public Summarizer {
public:
    std::string id() const override { return "stub-medoid"; }
    std::string summarize(const std::vector<SummaryMember>& members) override;
};

struct ClusterParams {
    std::size_t batch_size = 64;
    std::size_t max_iterations = 50;
    std::size_t rebuild_after = 64;  // full rebuild after this many insertions
};

// One clustering round: ids and vectors in matching order -> member id lists.
// Deterministic for a fixed seed; k is clamped to the item count; every
// cluster non-empty; clusters ordered by smallest member id.
std::vector<std::vector<std::uint64_t>> cluster_level(const std::vector<std::uint64_t>& ids,
                                                      const std::vector<Vec>& vectors,
                                                      std::size_t k, std::uint64_t seed,
                                                      const ClusterParams& params = {});

class AbstractionTree {
public:
    AbstractionTree() = default;

    // Clusters the leaves level by level: level 1 groups leaf embeddings,
    // level t groups level t-1 summary embeddings, finishing with kn roots.
    static AbstractionTree build(const std::vector<MethodNode>& leaves,
                                 const ClusterSchedule& schedule, std::uint64_t seed,
                                 Summarizer& summarizer, Embedder& embedder,
                                 const ClusterParams& params = {},
                                 std::uint64_t first_cluster_id = 1);

    // Attaches one new leaf to the nearest level-1 cluster (cosine on summary
    // embeddings, ties to the smaller cluster id) and marks the ancestor
    // chain stale. Returns true when the insertion count reached
    // rebuild_after, meaning the caller must rebuild.
    bool insert_leaf(const MethodNode& leaf, std::size_t rebuild_after);

    // Recomputes summaries of stale clusters bottom-up.
    void refresh(const std::vector<MethodNode>& leaves, Summarizer& summarizer,
                 Embedder& embedder);

    bool empty() const { return levels_.empty(); }
    int level_count() const { return static_cast<int>(levels_.size()); }
    const std::vector<ClusterId>& level(int t) const;  // t in [1, level_count()]
    const std::vector<ClusterId>& top_level() const { return level(level_count()); }
    const ClusterNode& cluster(ClusterId id) const;
    std::optional<ClusterId> parent_of(ClusterId id) const;
    ClusterId leaf_cluster_of(NodeId leaf) const;      // level-1 home
    ClusterId top_cluster_of(NodeId leaf) const;
    std::vector<ClusterId> path_to_leaf(NodeId leaf) const;  // top root first
    std::vector<NodeId> leaves_under(ClusterId id) const;
    std::vector<const ClusterNode*> all_clusters() const;    // id ascending
    std::size_t cluster_count() const { return clusters_.size(); }
    std::size_t leaf_count() const { return leaf_home_.size(); }

    const ClusterSchedule& schedule() const { return schedule_; }
    std::uint64_t next_cluster_id() const { return next_cluster_id_; }
    std::size_t insertions_since_rebuild() const { return insertions_since_rebuild_; }
    std::size_t stale_count() const { return stale_.size(); }

    // Every level partitions the layer below it.
    void validate_partition() const;

    // Snapshot restore: clusters carry their levels and children.
    static AbstractionTree restore(const std::vector<ClusterNode>& clusters,
                                   const ClusterSchedule& schedule,
                                   std::uint64_t next_cluster_id,
                                   std::size_t insertions_since_rebuild);

    std::string dot(const std::vector<MethodNode>& leaves) const;

private:
    void index_cluster(const ClusterNode& node);
    void mark_stale_chain(ClusterId id);

    std::vector<std::vector<ClusterId>> levels_;  // [0] = level 1
    std::map<ClusterId, ClusterNode> clusters_;
    std::map<ClusterId, ClusterId> parent_;
    std::map<NodeId, ClusterId> leaf_home_;
    std::set<ClusterId> stale_;
    ClusterSchedule schedule_;
    std::uint64_t next_cluster_id_ = 1;
    std::size_t insertions_since_rebuild_ = 0;
};

} // namespace forge
