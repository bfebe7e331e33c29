#include "forge/quality.hpp"

#include <algorithm>
#include <cmath>

#include "forge/util.hpp"

namespace forge {

double combine_score(const RubricWeights& weights, double clip,
                     const std::array<double, 4>& dims, bool gate) {
    if (std::fabs(weights.sum() - 1.0) > 1e-9) {
        throw ValidationError("rubric weights must sum to 1");
    }
    if (clip < 0.0 || clip > 1.0) {
        throw ValidationError("clip must lie in [0, 1]");
    }
    for (double d : dims) {
        if (!(d >= 0.0 && d <= 1.0)) {
            throw ValidationError("rubric dimensions must lie in [0, 1]");
        }
    }
    double s = weights.novelty * dims[0] + weights.consistency * dims[1] +
               weights.usefulness * dims[2] + weights.explainability * dims[3];
    return gate ? s : std::min(s, clip);
}

std::pair<std::vector<CandidateInnovation>, std::vector<CandidateInnovation>> prune(
    std::vector<CandidateInnovation> candidates, double threshold) {
    std::vector<CandidateInnovation> kept;
    std::vector<CandidateInnovation> rejected;
    for (auto& c : candidates) {
        if (c.score >= threshold) {
            c.status = CandidateStatus::kept;
            kept.push_back(std::move(c));
        } else {
            c.status = CandidateStatus::rejected;
            rejected.push_back(std::move(c));
        }
    }
    auto rank = [](const CandidateInnovation& a, const CandidateInnovation& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    };
    std::stable_sort(kept.begin(), kept.end(), rank);
    std::stable_sort(rejected.begin(), rejected.end(), rank);
    return {std::move(kept), std::move(rejected)};
}

const char* to_string(VerifyOutcome v) {
    switch (v) {
        case VerifyOutcome::pass: return "pass";
        case VerifyOutcome::fail: return "fail";
        case VerifyOutcome::timeout: return "timeout";
        case VerifyOutcome::not_formalizable: return "not_formalizable";
    }
    return "?";
}

VerifyPolicy verify_policy_from_string(const std::string& s) {
    if (s == "downgrade") return VerifyPolicy::downgrade;
    if (s == "strict") return VerifyPolicy::strict;
    throw ValidationError("unknown verify policy: " + s);
}

CandidateStatus apply_verification(CandidateInnovation& candidate, Verifier* verifier,
                                   VerifyPolicy policy, AuditLog* audit,
                                   std::uint64_t snapshot_version) {
    std::string outcome_name;
    CandidateStatus next;
    if (verifier == nullptr) {
        // Nothing to check against: the claim stays a conjecture.
        outcome_name = "no_verifier";
        next = CandidateStatus::conjecture;
    } else {
        VerifyOutcome outcome = verifier->check(candidate.summary + "\n" + candidate.validation_plan);
        outcome_name = to_string(outcome);
        switch (outcome) {
            case VerifyOutcome::pass:
                next = CandidateStatus::verified;
                break;
            case VerifyOutcome::fail:
            case VerifyOutcome::timeout:
                next = policy == VerifyPolicy::strict ? CandidateStatus::rejected
                                                      : CandidateStatus::conjecture;
                break;
            case VerifyOutcome::not_formalizable:
                next = CandidateStatus::conjecture;
                break;
            default:
                throw IntegrityError("unhandled verify outcome");
        }
    }
    candidate.status = next;
    if (audit != nullptr) {
        nlohmann::ordered_json ev;
        ev["type"] = "candidate_verified";
        ev["candidate"] = candidate.id;
        ev["verifier"] = verifier == nullptr ? "null" : verifier->id();
        ev["outcome"] = outcome_name;
        ev["status"] = to_string(next);
        audit->append(AuditActor::verification, std::move(ev), snapshot_version);
    }
    return next;
}

std::array<double, 5> StubScorer::score(const CandidateInnovation& candidate,
                                        const RetrievalContext& context,
                                        const Repository& repo) {
    if (embedder_ == nullptr) {
        throw ValidationError("stub scorer needs an embedder");
    }
    Vec cand = embedder_->embed(candidate.summary);

    double max_parent_sim = 0.0;
    std::size_t resolved = 0;
    for (const auto& p : candidate.parents) {
        const MethodNode* node = repo.find_node(p.id);
        if (node == nullptr || node->embedding.empty()) continue;
        ++resolved;
        max_parent_sim = std::max(max_parent_sim, std::max(0.0, cosine(cand, node->embedding)));
    }

    std::array<double, 5> dims{};
    dims[kRubricNovelty] = candidate.parents.empty() ? 1.0 : 1.0 - max_parent_sim;
    dims[kRubricConsistency] =
        candidate.parents.empty()
            ? 0.0
            : static_cast<double>(resolved) / static_cast<double>(candidate.parents.size());
    dims[kRubricVerifiability] = trim(candidate.validation_plan).empty() ? 0.0 : 1.0;
    dims[kRubricApplicability] = trim(candidate.applicability).empty() ? 0.0 : 1.0;
    dims[kRubricAlignment] = context.query_embedding.empty()
                                 ? 0.0
                                 : std::max(0.0, cosine(cand, context.query_embedding));
    for (double& d : dims) d = std::clamp(d, 0.0, 1.0);
    return dims;
}

void score_candidate(CandidateInnovation& candidate, const RetrievalContext& context,
                     const Repository& repo, Scorer& scorer, const Config& config,
                     AuditLog* audit, std::uint64_t snapshot_version) {
    candidate.rubric = scorer.score(candidate, context, repo);
    for (double d : candidate.rubric) {
        if (!(d >= 0.0 && d <= 1.0)) {
            throw ValidationError("scorer returned a dimension outside [0, 1]");
        }
    }
    // The merged consistency/explainability judgment feeds both slots of the
    // combined score; verifiability is the verifier's job, alignment gates.
    std::array<double, 4> dims{candidate.rubric[kRubricNovelty],
                               candidate.rubric[kRubricConsistency],
                               candidate.rubric[kRubricApplicability],
                               candidate.rubric[kRubricConsistency]};
    candidate.gate = candidate.rubric[kRubricAlignment] > config.scoring.gate_min_alignment;
    candidate.score = combine_score(config.scoring.weights, config.scoring.clip, dims, candidate.gate);
    if (audit != nullptr) {
        nlohmann::ordered_json ev;
        ev["type"] = "candidate_scored";
        ev["candidate"] = candidate.id;
        ev["scorer"] = scorer.id();
        ev["novelty"] = candidate.rubric[kRubricNovelty];
        ev["consistency"] = candidate.rubric[kRubricConsistency];
        ev["verifiability"] = candidate.rubric[kRubricVerifiability];
        ev["applicability"] = candidate.rubric[kRubricApplicability];
        ev["alignment"] = candidate.rubric[kRubricAlignment];
        ev["gate"] = candidate.gate;
        ev["score"] = candidate.score;
        audit->append(AuditActor::scoring, std::move(ev), snapshot_version);
    }
}

SafetyPredicate default_safety_predicate() {
    return [](const CandidateInnovation& c) { return !trim(c.validation_plan).empty(); };
}

namespace {

std::vector<std::string> summary_keywords(const std::string& summary) {
    std::vector<std::string> out;
    for (const auto& tok : tokenize(summary)) {
        if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(tok);
        if (out.size() == 8) break;
    }
    return out;
}

} // namespace

WriteBackResult write_back(Repository& repo, std::vector<CandidateInnovation>& candidates,
                           Summarizer& summarizer, Embedder& embedder,
                           const SafetyPredicate& safety) {
    WriteBackResult result;
    bool needs_rebuild = false;

    for (auto& cand : candidates) {
        if (cand.status != CandidateStatus::conjecture && cand.status != CandidateStatus::verified) {
            continue;
        }
        if (safety && !safety(cand)) {
            cand.status = CandidateStatus::rejected;
            result.filtered.push_back(cand.id);
            nlohmann::ordered_json ev;
            ev["type"] = "candidate_filtered";
            ev["candidate"] = cand.id;
            ev["reason"] = "safety predicate refused the candidate";
            repo.audit.append(AuditActor::writeback, std::move(ev), repo.version);
            continue;
        }

        NodeId missing_parent = 0;
        for (const auto& p : cand.parents) {
            if (repo.find_node(p.id) == nullptr) {
                missing_parent = p.id;
                break;
            }
        }
        if (missing_parent != 0) {
            // Parent vanished between synthesis and write-back; keep the
            // candidate label so a later pass can retry.
            result.requeued.push_back(cand.id);
            nlohmann::ordered_json ev;
            ev["type"] = "write_back_requeued";
            ev["candidate"] = cand.id;
            ev["missing_parent"] = missing_parent;
            repo.audit.append(AuditActor::writeback, std::move(ev), repo.version);
            continue;
        }

        MethodNode node;
        node.id = repo.next_node_id++;
        node.name = cand.operator_id + "-" + std::to_string(cand.id);
        node.summary = cand.summary;
        node.keywords = summary_keywords(cand.summary);
        node.status = cand.status == CandidateStatus::verified ? NodeStatus::verified
                                                               : NodeStatus::conjecture;
        node.embedding = embedder.embed(embedding_text(node.name, node.summary, node.keywords));
        NodeId node_id = node.id;

        std::vector<ContributionEdge> incoming;
        incoming.reserve(cand.parents.size());
        for (const auto& p : cand.parents) {
            ContributionEdge e;
            e.src = p.id;
            e.dst = node_id;
            e.rating = weight_to_rating(std::clamp(p.weight, 0.0, 1.0));
            e.weight = rating_to_weight(e.rating);
            e.share = p.share;
            e.explanation = p.explanation;
            incoming.push_back(std::move(e));
        }

        repo.provenance.attach_new_node(node_id, incoming);
        repo.nodes.push_back(std::move(node));
        for (auto& e : incoming) repo.edges.push_back(std::move(e));
        if (repo.abstraction.insert_leaf(repo.nodes.back(), repo.config.abstraction.rebuild_after)) {
            needs_rebuild = true;
        }
        result.written.push_back(node_id);

        nlohmann::ordered_json ev;
        ev["type"] = "node_written";
        ev["node"] = node_id;
        ev["candidate"] = cand.id;
        ev["operator"] = cand.operator_id;
        ev["status"] = to_string(repo.nodes.back().status);
        ev["score"] = cand.score;
        nlohmann::ordered_json parents = nlohmann::ordered_json::array();
        for (const auto& p : cand.parents) {
            nlohmann::ordered_json pj;
            pj["id"] = p.id;
            pj["rating"] = weight_to_rating(std::clamp(p.weight, 0.0, 1.0));
            pj["share"] = p.share;
            parents.push_back(std::move(pj));
        }
        ev["parents"] = std::move(parents);
        repo.audit.append(AuditActor::writeback, std::move(ev), repo.version);
    }

    if (!result.written.empty()) {
        if (needs_rebuild) {
            ClusterSchedule schedule = make_schedule(
                repo.nodes.size(), repo.config.abstraction.levels,
                repo.config.abstraction.initial_clusters, repo.config.abstraction.final_clusters,
                repo.config.abstraction.min_clusters);
            ClusterParams params;
            params.batch_size = repo.config.abstraction.batch_size;
            params.max_iterations = repo.config.abstraction.max_iterations;
            params.rebuild_after = repo.config.abstraction.rebuild_after;
            std::uint64_t first_cluster_id = repo.abstraction.next_cluster_id();
            repo.abstraction = AbstractionTree::build(repo.nodes, schedule, repo.config.seed,
                                                      summarizer, embedder, params, first_cluster_id);
            result.rebuilt_abstraction = true;
            nlohmann::ordered_json ev;
            ev["type"] = "abstraction_rebuilt";
            ev["leaves"] = repo.nodes.size();
            ev["clusters"] = repo.abstraction.cluster_count();
            ev["first_cluster_id"] = first_cluster_id;
            repo.audit.append(AuditActor::writeback, std::move(ev), repo.version);
        } else {
            repo.abstraction.refresh(repo.nodes, summarizer, embedder);
        }
        repo.version += 1;
        repo.rebuild_indexes();
    }
    return result;
}

} // namespace forge
