#include "forge/synthesis.hpp"

#include <algorithm>
#include <set>

#include "forge/util.hpp"

namespace forge {

namespace {

std::size_t distinct_top_clusters(const SynthesisView& view) {
    std::set<ClusterId> tops;
    for (const auto& [leaf, sim] : view.context.leaves)
        if (view.abstraction.leaf_count() > 0) tops.insert(view.abstraction.top_cluster_of(leaf));
    return tops.size();
}

bool any_leaf_has_parent(const SynthesisView& view) {
    for (const auto& [leaf, sim] : view.context.leaves)
        if (view.provenance.has_node(leaf) && view.provenance.primary(leaf)) return true;
    return false;
}

} // namespace

const std::vector<Operator>& default_operators() {
    static const std::vector<Operator> library = [] {
        std::vector<Operator> ops;
        ops.push_back(Operator{
            "analogy",
            "Transfer the structure of one method onto the domain of another.",
            "Map the roles of {source} onto {target}; keep the invariants, swap the domain.",
            {"surface resemblance without shared structure", "domain constraints ignored"},
            [](const SynthesisView& v) {
                return v.context.leaves.size() >= 2 && distinct_top_clusters(v) >= 2;
            }});
        ops.push_back(Operator{
            "deduction",
            "Push a derivation chain one step further than its current endpoint.",
            "Given {premises} and the chain ending at {leaf}, derive the next consequence.",
            {"hidden premise not in evidence", "conclusion restates a premise"},
            [](const SynthesisView& v) {
                return !v.context.leaves.empty() && any_leaf_has_parent(v);
            }});
        ops.push_back(Operator{
            "induction",
            "Generalize a shared pattern across sibling methods.",
            "List what {instances} have in common; state the rule that covers them.",
            {"overgeneralization from two cases", "pattern is coincidental"},
            [](const SynthesisView& v) { return v.context.leaves.size() >= 2; }});
        ops.push_back(Operator{
            "abduction",
            "Propose the mechanism that would best explain the observed method.",
            "Assume {observation} works; hypothesize the simplest mechanism behind it.",
            {"explanation is unfalsifiable", "mechanism duplicates a known method"},
            [](const SynthesisView& v) { return !v.context.leaves.empty(); }});
        return ops;
    }();
    return library;
}

const Operator& select_operator(const std::vector<Operator>& library, const SynthesisView& view,
                                AuditLog* audit, std::uint64_t snapshot_version,
                                const std::optional<std::string>& forced) {
    if (forced) {
        for (const auto& op : library) {
            if (op.id == *forced) {
                if (audit)
                    audit->append(AuditActor::synthesis,
                                  {{"event", "operator_selected"},
                                   {"operator", op.id},
                                   {"rationale", "forced by caller"}},
                                  snapshot_version);
                return op;
            }
        }
        throw NotFoundError("unknown operator: " + *forced);
    }
    for (const auto& op : library) {
        if (op.applicable && op.applicable(view)) {
            if (audit)
                audit->append(AuditActor::synthesis,
                              {{"event", "operator_selected"},
                               {"operator", op.id},
                               {"rationale", "first applicable in library order"},
                               {"context_leaves", view.context.leaves.size()}},
                              snapshot_version);
            return op;
        }
    }
    throw NoOperatorError("no operator applies to this context");
}

std::vector<CandidateDraft> StubGenerator::generate(const Operator& op,
                                                    const RetrievalContext& context,
                                                    const std::string& query, int count,
                                                    const NodeResolver& resolve) {
    (void)query;
    std::vector<CandidateDraft> drafts;
    if (context.leaves.empty() || count < 1) return drafts;

    std::size_t take = std::min(max_parents_, context.leaves.size());
    std::vector<std::pair<NodeId, std::string>> parents;
    std::vector<double> weights;
    std::string names;
    std::string fused;
    for (std::size_t i = 0; i < take; ++i) {
        auto [id, sim] = context.leaves[i];
        const MethodNode* node = resolve(id);
        std::string name = node ? node->name : ("node-" + std::to_string(id));
        parents.emplace_back(id, "retrieved at rank " + std::to_string(i + 1) + " for the query");
        weights.push_back(std::clamp(sim, 0.0, 1.0));
        if (!names.empty()) names += " and ";
        names += name;
        if (node && !node->summary.empty()) {
            if (!fused.empty()) fused += " ";
            fused += node->summary;
        }
    }
    if (fused.empty()) fused = "the retrieved methods";

    for (int v = 1; v <= count; ++v) {
        CandidateDraft d;
        d.summary = "By " + op.id + " from " + names + ": " + fused + " [v" +
                    std::to_string(v) + "]";
        d.novelty_notes = "Combines " + names + " under the " + op.id + " operator, variant " +
                          std::to_string(v) + ".";
        d.applicability = "Applies wherever the parent methods' assumptions hold.";
        d.validation_plan = "Compare against " + names +
                            " on a shared benchmark; ablate the " + op.id + " step.";
        d.parents = parents;
        d.parent_weights = weights;
        drafts.push_back(std::move(d));
    }
    return drafts;
}

InnovateResult innovate(const SynthesisView& view, const Operator& op,
                        const std::string& query, int count, Generator& generator,
                        const NodeResolver& resolve, double epsilon,
                        std::uint64_t* next_candidate_id, AuditLog* audit,
                        std::uint64_t snapshot_version) {
    if (count < 1) throw ValidationError("candidate count must be positive");
    if (next_candidate_id == nullptr) throw ValidationError("candidate id counter required");

    InnovateResult result;
    auto drafts = generator.generate(op, view.context, query, count, resolve);
    if (static_cast<int>(drafts.size()) < count)
        result.shortfalls.push_back("generator returned " + std::to_string(drafts.size()) +
                                    " of " + std::to_string(count) + " drafts");

    for (auto& draft : drafts) {
        if (draft.parents.empty()) {
            result.shortfalls.push_back("draft without parent attribution dropped");
            continue;
        }
        if (draft.parent_weights.size() != draft.parents.size())
            throw ValidationError("draft parent weights misaligned");

        // Dedupe parents (first occurrence wins) and check context membership.
        std::vector<std::pair<NodeId, std::string>> parents;
        std::vector<double> weights;
        std::set<NodeId> seen;
        std::string out_of_context;
        for (std::size_t i = 0; i < draft.parents.size(); ++i) {
            NodeId id = draft.parents[i].first;
            if (!seen.insert(id).second) continue;
            if (!view.context.contains(id)) {
                out_of_context = std::to_string(id);
                break;
            }
            parents.push_back(draft.parents[i]);
            weights.push_back(std::clamp(draft.parent_weights[i], 0.0, 1.0));
        }
        if (!out_of_context.empty()) {
            result.shortfalls.push_back("draft rejected: parent " + out_of_context +
                                        " is not in the retrieval context");
            if (audit)
                audit->append(AuditActor::synthesis,
                              {{"event", "draft_rejected"},
                               {"reason", "parent outside retrieval context"},
                               {"parent", out_of_context}},
                              snapshot_version);
            continue;
        }

        // Weights are renormalized to sum to one before the epsilon guard so
        // shares stay meaningful even when similarities are tiny.
        double sum = 0.0;
        for (double w : weights) sum += w;
        if (sum <= 0.0) {
            std::fill(weights.begin(), weights.end(), 1.0);
            sum = static_cast<double>(weights.size());
        }
        std::vector<std::pair<NodeId, double>> scaled;
        for (std::size_t i = 0; i < parents.size(); ++i)
            scaled.emplace_back(parents[i].first, weights[i] / sum);
        auto shares = normalize_shares(scaled, epsilon);

        CandidateInnovation cand;
        cand.id = (*next_candidate_id)++;
        cand.summary = draft.summary;
        cand.operator_id = op.id;
        cand.novelty_notes = draft.novelty_notes;
        cand.applicability = draft.applicability;
        cand.validation_plan = draft.validation_plan;
        for (std::size_t i = 0; i < parents.size(); ++i) {
            ParentAttribution pa;
            pa.id = parents[i].first;
            pa.weight = scaled[i].second;
            pa.share = shares[i].second;
            pa.explanation = parents[i].second;
            cand.parents.push_back(std::move(pa));
        }
        cand.status = CandidateStatus::pending;

        if (audit) {
            nlohmann::ordered_json jparents = nlohmann::ordered_json::array();
            for (const auto& p : cand.parents)
                jparents.push_back({{"id", p.id}, {"share", p.share}});
            audit->append(AuditActor::synthesis,
                          {{"event", "candidate_generated"},
                           {"candidate", cand.id},
                           {"operator", op.id},
                           {"parents", jparents},
                           {"rationale", cand.novelty_notes}},
                          snapshot_version);
        }
        result.candidates.push_back(std::move(cand));
    }
    return result;
}

EvidenceSet collect_evidence(const ProvenanceTree& tree,
                             const std::vector<ContributionEdge>& edges,
                             const CandidateInnovation& candidate, int d_min, int d_range,
                             double gamma) {
    std::set<NodeId> visited;
    for (const auto& parent : candidate.parents) {
        if (!tree.has_node(parent.id))
            throw NotFoundError("evidence: unknown parent " + std::to_string(parent.id));
        visited.insert(parent.id);
        int depth_budget = adaptive_depth(parent.share, d_min, d_range, gamma);
        NodeId cur = parent.id;
        for (int d = 0; d < depth_budget; ++d) {
            auto link = tree.primary(cur);
            if (!link) break;
            cur = link->parent;
            visited.insert(cur);
        }
    }
    EvidenceSet out;
    out.nodes.assign(visited.begin(), visited.end());
    for (const auto& e : edges) {
        if (e.kind != EdgeKind::supporting) continue;
        if (visited.count(e.src) || visited.count(e.dst)) out.edges.push_back(e);
    }
    std::sort(out.edges.begin(), out.edges.end(),
              [](const ContributionEdge& a, const ContributionEdge& b) {
                  if (a.dst != b.dst) return a.dst < b.dst;
                  return a.src < b.src;
              });
    return out;
}

} // namespace forge
