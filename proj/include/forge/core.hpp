#pragma once

/*
 * Domain model for the method-knowledge engine.
 *
 * DESIGN INVARIANTS
 * -----------------
 * 1. Edge weights are always derived from integer ratings: w = (r - 1) / 4,
 *    so w lives on {0, 0.25, 0.5, 0.75, 1}. Stored weight and rating never
 *    drift apart.
 * 2. Node and cluster ids are assigned sequentially and never reused. Every
 *    tie in the engine breaks toward the smaller id.
 * 3. Status moves only forward: extracted/synthesized may become conjecture,
 *    verified or rejected; conjecture may be settled later; verified and
 *    rejected are terminal.
 * 4. Embeddings are unit-norm vectors of the configured dimension.
 */

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace forge {

using NodeId = std::uint64_t;
using ClusterId = std::uint64_t;
using Vec = std::vector<float>;

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProviderError : public std::runtime_error {
public:
    ProviderError(const std::string& what, bool retriable)
        : std::runtime_error(what), retriable_(retriable) {}
    bool retriable() const { return retriable_; }

private:
    bool retriable_;
};

enum class NodeStatus { extracted, synthesized, conjecture, verified, rejected };

const char* to_string(NodeStatus s);
NodeStatus node_status_from_string(const std::string& s);

// Forward-only lifecycle; see invariant 3 above.
bool status_transition_allowed(NodeStatus from, NodeStatus to);

struct SourceRef {
    std::string doc_id;
    std::string segment_id;
    bool operator==(const SourceRef&) const = default;
    bool operator<(const SourceRef& o) const {
        return doc_id != o.doc_id ? doc_id < o.doc_id : segment_id < o.segment_id;
    }
};

struct MethodNode {
    NodeId id = 0;
    std::string name;
    std::string summary;
    std::vector<std::string> keywords;
    Vec embedding;
    NodeStatus status = NodeStatus::extracted;
    std::vector<SourceRef> sources;
    std::vector<NodeId> merged_from;
};

// Text fed to the embedder for a method: name, summary and keywords joined
// by single spaces. Used everywhere a node embedding is (re)computed.
std::string embedding_text(const std::string& name, const std::string& summary,
                           const std::vector<std::string>& keywords);

enum class EdgeKind { primary, supporting };

struct ContributionEdge {
    NodeId src = 0;
    NodeId dst = 0;
    int rating = 1;                 // integer 1..5
    double weight = 0.0;            // (rating - 1) / 4, kept in lockstep
    std::optional<double> share;    // normalized share, set for synthesized edges
    std::string explanation;
    EdgeKind kind = EdgeKind::supporting;
    bool demoted = false;           // displaced from the backbone by cycle breaking
};

struct ClusterNode {
    ClusterId id = 0;
    int level = 1;                      // 1 = clusters of leaves, grows upward
    std::vector<std::uint64_t> children; // method ids at level 1, cluster ids above
    std::string summary;
    Vec summary_embedding;
};

struct TraceStep {
    int level = 0;                      // cluster level; 0 marks the leaf stage
    std::vector<std::uint64_t> pool;    // candidate ids examined, ascending
    std::vector<std::pair<std::uint64_t, double>> selected; // ranked (id, similarity)
};

struct BacktrackStep {
    NodeId leaf = 0;
    int depth = 0;
    NodeId ancestor = 0;
    double influence = 0.0;
    bool included = false;
    std::string reason;
};

struct AncestorHit {
    NodeId ancestor = 0;
    NodeId leaf = 0;     // leaf whose chain contributed this entry
    int depth = 0;
    double influence = 0.0;
};

struct RetrievalContext {
    std::string query_text;
    Vec query_embedding;
    std::vector<std::pair<NodeId, double>> leaves;  // similarity desc, id asc
    std::vector<AncestorHit> ancestors;             // influence desc, id asc
    std::vector<TraceStep> trace;                   // funnel descent, top first
    std::vector<BacktrackStep> backtrack;           // every inclusion decision

    // Leaf and ancestor ids, sorted and deduplicated.
    std::vector<NodeId> node_ids() const;
    bool contains(NodeId id) const;
};

enum class CandidateStatus { pending, kept, rejected, conjecture, verified };

const char* to_string(CandidateStatus s);

struct ParentAttribution {
    NodeId id = 0;
    double weight = 0.0;   // contribution weight before normalization, in [0,1]
    double share = 0.0;    // weight / (sum of weights + epsilon)
    std::string explanation;
};

// Rubric slots scored for every candidate, in storage order.
enum RubricDim : std::size_t {
    kRubricNovelty = 0,
    kRubricConsistency = 1,
    kRubricVerifiability = 2,
    kRubricApplicability = 3,
    kRubricAlignment = 4,
};

struct CandidateInnovation {
    std::uint64_t id = 0;
    std::string summary;
    std::string operator_id;
    std::vector<ParentAttribution> parents;
    std::string novelty_notes;
    std::string applicability;
    std::string validation_plan;
    std::array<double, 5> rubric{};
    bool gate = true;
    double score = 0.0;
    CandidateStatus status = CandidateStatus::pending;
};

// Maps an integer rating 1..5 onto [0,1]. Throws ValidationError outside the range.
double rating_to_weight(int rating);

// Nearest valid rating for a weight in [0,1]: r = round(4w) + 1.
int weight_to_rating(double weight);

// Epsilon-regularized shares: share_i = w_i / (sum_k w_k + epsilon).
// Weights must be non-negative and epsilon positive. The output order matches
// the input order; the shares sum to sum/(sum+epsilon), slightly below one.
std::vector<std::pair<NodeId, double>> normalize_shares(
    const std::vector<std::pair<NodeId, double>>& weights, double epsilon);

} // namespace forge
