#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/abstraction.hpp"
#include "forge/audit.hpp"
#include "forge/core.hpp"
#include "forge/provenance.hpp"

namespace forge {

struct SynthesisView {
    const RetrievalContext& context;
    const AbstractionTree& abstraction;
    const ProvenanceTree& provenance;
};

struct Operator {
    std::string id;
    std::string definition;
    std::string prompt_skeleton;
    std::vector<std::string> failure_modes;
    std::function<bool(const SynthesisView&)> applicable;
};

class NoOperatorError : public NotFoundError {
public:
    using NotFoundError::NotFoundError;
};

// Evaluation order: analogy, deduction, induction, abduction. Analogy fires
// on parents from at least two distinct top-level clusters; deduction needs a
// leaf with a derivation chain; induction needs two leaves; abduction takes
// any non-empty context. An empty context matches nothing.
const std::vector<Operator>& default_operators();

// First operator whose predicate accepts, or the forced one (bypassing
// predicates). Logs the selection rationale. Throws NoOperatorError when
// nothing applies and NotFoundError for an unknown forced id.
const Operator& select_operator(const std::vector<Operator>& library, const SynthesisView& view,
                                AuditLog* audit, std::uint64_t snapshot_version,
                                const std::optional<std::string>& forced = std::nullopt);

struct CandidateDraft {
    std::string summary;
    std::string novelty_notes;
    std::string applicability;
    std::string validation_plan;
    std::vector<std::pair<NodeId, std::string>> parents;  // (id, explanation)
    std::vector<double> parent_weights;                   // aligned, raw in [0,1]
};

using NodeResolver = std::function<const MethodNode*(NodeId)>;

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string id() const = 0;
    virtual std::vector<CandidateDraft> generate(const Operator& op,
                                                 const RetrievalContext& context,
                                                 const std::string& query, int count,
                                                 const NodeResolver& resolve) = 0;
};

// Deterministic template filler: parents are the top retrieved leaves (at
// most max_parents), weighted by their clamped similarities; variants differ
// by an index suffix.
class StubGenerator : public Generator {
public:
    explicit StubGenerator(std::size_t max_parents = 4) : max_parents_(max_parents) {}
    std::string id() const override { return "stub-template"; }
    std::vector<CandidateDraft> generate(const Operator& op, const RetrievalContext& context,
                                         const std::string& query, int count,
                                         const NodeResolver& resolve) override;

private:
    std::size_t max_parents_;
};

struct InnovateResult {
    std::vector<CandidateInnovation> candidates;
    std::vector<std::string> shortfalls;  // why fewer than requested came back
};

// Requests `count` drafts, validates parent attribution (parents must be
// drawn from the retrieval context), normalizes shares with the epsilon
// guard, and assigns candidate ids sequentially from *next_candidate_id.
// Every accepted candidate is logged with parents, rationale and operator.
InnovateResult innovate(const SynthesisView& view, const Operator& op,
                        const std::string& query, int count, Generator& generator,
                        const NodeResolver& resolve, double epsilon,
                        std::uint64_t* next_candidate_id, AuditLog* audit,
                        std::uint64_t snapshot_version);

struct EvidenceSet {
    std::vector<NodeId> nodes;              // parents plus walked ancestors, ascending
    std::vector<ContributionEdge> edges;    // supporting edges touching those nodes
};

// Walks each parent's primary chain up to adaptive_depth(share) ancestors and
// unions the visited nodes with the supporting edges incident to them.
EvidenceSet collect_evidence(const ProvenanceTree& tree,
                             const std::vector<ContributionEdge>& edges,
                             const CandidateInnovation& candidate, int d_min, int d_range,
                             double gamma);

} // namespace forge
