#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "forge/config.hpp"
#include "forge/core.hpp"
#include "forge/repository.hpp"

namespace forge {

// Weighted combination of the four judged dimensions (novelty, consistency,
// usefulness, explainability), each in [0,1]. A failed relevance gate clips
// the result at `clip`. Weights must sum to 1 within 1e-9.
double combine_score(const RubricWeights& weights, double clip,
                     const std::array<double, 4>& dims, bool gate);

// Splits candidates at the threshold (ties are kept), stamps kept/rejected,
// and sorts both sides by score descending, then id ascending.
std::pair<std::vector<CandidateInnovation>, std::vector<CandidateInnovation>> prune(
    std::vector<CandidateInnovation> candidates, double threshold);

enum class VerifyOutcome { pass, fail, timeout, not_formalizable };

const char* to_string(VerifyOutcome v);

class Verifier {
public:
    virtual ~Verifier() = default;
    virtual std::string id() const = 0;
    virtual VerifyOutcome check(const std::string& request) = 0;
};

class AlwaysPassVerifier : public Verifier {
public:
    std::string id() const override { return "pass"; }
    VerifyOutcome check(const std::string&) override { return VerifyOutcome::pass; }
};

class AlwaysFailVerifier : public Verifier {
public:
    std::string id() const override { return "fail"; }
    VerifyOutcome check(const std::string&) override { return VerifyOutcome::fail; }
};

enum class VerifyPolicy { downgrade, strict };

VerifyPolicy verify_policy_from_string(const std::string& s);

// Labels one candidate: pass -> verified; fail/timeout -> conjecture under
// downgrade, rejected under strict; not formalizable -> conjecture; no
// verifier at all -> conjecture. A retriable provider error propagates and
// leaves the candidate untouched.
CandidateStatus apply_verification(CandidateInnovation& candidate, Verifier* verifier,
                                   VerifyPolicy policy, AuditLog* audit,
                                   std::uint64_t snapshot_version);

// Five rubric dimensions in storage order (novelty, consistency,
// verifiability, applicability, alignment), each in [0,1].
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::string id() const = 0;
    virtual std::array<double, 5> score(const CandidateInnovation& candidate,
                                        const RetrievalContext& context,
                                        const Repository& repo) = 0;
};

// Deterministic structural scorer: novelty from distance to the nearest
// parent, consistency from parent resolvability, verifiability/applicability
// from plan presence, alignment from query similarity.
class StubScorer : public Scorer {
public:
    explicit StubScorer(Embedder* embedder) : embedder_(embedder) {}
    std::string id() const override { return "stub-structural"; }
    std::array<double, 5> score(const CandidateInnovation& candidate,
                                const RetrievalContext& context,
                                const Repository& repo) override;

private:
    Embedder* embedder_;
};

// Scores the candidate in place: fills rubric, gate (alignment must exceed
// gate_min_alignment) and the combined score. The judged dimensions map as
// novelty, consistency, applicability->usefulness; the merged
// consistency/explainability slot feeds both C and E; verifiability is left
// to the verifier; alignment drives the gate.
void score_candidate(CandidateInnovation& candidate, const RetrievalContext& context,
                     const Repository& repo, Scorer& scorer, const Config& config,
                     AuditLog* audit, std::uint64_t snapshot_version);

using SafetyPredicate = std::function<bool(const CandidateInnovation&)>;

// Default deny-list: refuse any candidate without a validation plan.
SafetyPredicate default_safety_predicate();

struct WriteBackResult {
    std::vector<NodeId> written;            // new node ids, in write order
    std::vector<std::uint64_t> filtered;    // candidate ids blocked by safety
    std::vector<std::uint64_t> requeued;    // candidate ids with vanished parents
    bool rebuilt_abstraction = false;
};

// Turns verification-labeled candidates into nodes and weighted edges,
// attaches them to both trees, and bumps the snapshot version once if
// anything was written. Edge ratings reverse-map from the stored parent
// weight (r = round(4w) + 1); shares are preserved on the edges. Appends a
// writeback audit record per node.
WriteBackResult write_back(Repository& repo, std::vector<CandidateInnovation>& candidates,
                           Summarizer& summarizer, Embedder& embedder,
                           const SafetyPredicate& safety = default_safety_predicate());

} // namespace forge
