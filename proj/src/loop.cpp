#include "forge/loop.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <utility>

#include "forge/quality.hpp"
#include "forge/synthesis.hpp"

namespace forge {

namespace {

// The weakest pair of top-level clusters: least summed contribution weight
// crossing between their leaf sets, ties toward the smaller id pair. With a
// single root the question is just that root's summary.
std::string gap_question(const Repository& repo, AuditLog& audit) {
    const auto& tops = repo.abstraction.top_level();
    if (tops.empty()) {
        throw NotFoundError("loop requires a built abstraction hierarchy");
    }
    if (tops.size() == 1) {
        const ClusterNode& only = repo.abstraction.cluster(tops[0]);
        nlohmann::ordered_json ev;
        ev["type"] = "gap_selected";
        ev["clusters"] = {only.id};
        ev["cross_weight"] = 0.0;
        audit.append(AuditActor::loop, std::move(ev), repo.version);
        return only.summary;
    }

    std::map<NodeId, ClusterId> home;
    for (const auto& node : repo.nodes) {
        home[node.id] = repo.abstraction.top_cluster_of(node.id);
    }
    std::map<std::pair<ClusterId, ClusterId>, double> cross;
    for (std::size_t i = 0; i < tops.size(); ++i) {
        for (std::size_t j = i + 1; j < tops.size(); ++j) {
            ClusterId a = std::min(tops[i], tops[j]);
            ClusterId b = std::max(tops[i], tops[j]);
            cross[{a, b}] = 0.0;
        }
    }
    for (const auto& e : repo.edges) {
        ClusterId a = home.at(e.src);
        ClusterId b = home.at(e.dst);
        if (a == b) continue;
        cross[{std::min(a, b), std::max(a, b)}] += e.weight;
    }

    std::pair<ClusterId, ClusterId> best{0, 0};
    double best_weight = std::numeric_limits<double>::infinity();
    for (const auto& [pair, weight] : cross) {
        if (weight < best_weight) {
            best_weight = weight;
            best = pair;
        }
    }

    nlohmann::ordered_json ev;
    ev["type"] = "gap_selected";
    ev["clusters"] = {best.first, best.second};
    ev["cross_weight"] = best_weight;
    audit.append(AuditActor::loop, std::move(ev), repo.version);
    return repo.abstraction.cluster(best.first).summary + " " +
           repo.abstraction.cluster(best.second).summary;
}

} // namespace

LoopReport run_loop(Repository& repo, int iterations, const LoopBudgets& budgets,
                    Providers& providers) {
    if (iterations < 0) {
        throw ValidationError("iterations must be non-negative");
    }
    if (repo.nodes.empty()) {
        throw NotFoundError("loop requires a non-empty repository");
    }

    LoopReport report;
    report.halt_reason = "completed";
    VerifyPolicy policy = verify_policy_from_string(repo.config.verify.policy);
    NodeResolver resolve = make_resolver(repo);

    auto spend = [&](std::uint64_t n) {
        if (report.calls_used + n > budgets.max_calls) return false;
        report.calls_used += n;
        return true;
    };

    for (int it = 1; it <= iterations; ++it) {
        int want = repo.config.synthesis.candidates;
        if (report.candidates_generated + static_cast<std::uint64_t>(want) >
            budgets.max_candidates) {
            report.halt_reason = "candidate budget exhausted";
            break;
        }
        if (!spend(1)) {  // query embedding
            report.halt_reason = "call budget exhausted";
            break;
        }

        IterationRecord rec;
        rec.iteration = it;
        rec.query = gap_question(repo, repo.audit);
        RetrievalContext ctx = repo.run_query(rec.query, *providers.embedder);
        SynthesisView view{ctx, repo.abstraction, repo.provenance};

        if (!spend(1)) {  // generation
            report.halt_reason = "call budget exhausted";
            break;
        }
        std::vector<CandidateInnovation> candidates;
        try {
            const Operator& op =
                select_operator(default_operators(), view, &repo.audit, repo.version);
            rec.operator_id = op.id;
            InnovateResult made =
                innovate(view, op, rec.query, want, *providers.generator, resolve,
                         repo.config.epsilon, &repo.next_candidate_id, &repo.audit, repo.version);
            candidates = std::move(made.candidates);
        } catch (const NoOperatorError& e) {
            nlohmann::ordered_json ev;
            ev["type"] = "iteration_skipped";
            ev["iteration"] = it;
            ev["reason"] = e.what();
            repo.audit.append(AuditActor::loop, std::move(ev), repo.version);
            rec.nodes_total = repo.nodes.size();
            rec.calls_used = report.calls_used;
            report.iterations.push_back(std::move(rec));
            continue;
        }
        rec.generated = static_cast<int>(candidates.size());
        report.candidates_generated += candidates.size();

        if (!spend(candidates.size())) {  // one score per candidate
            report.halt_reason = "call budget exhausted";
            break;
        }
        for (auto& cand : candidates) {
            score_candidate(cand, ctx, repo, *providers.scorer, repo.config, &repo.audit,
                            repo.version);
        }

        auto [kept, rejected] = prune(std::move(candidates), repo.config.scoring.threshold);
        rec.kept = static_cast<int>(kept.size());
        rec.rejected = static_cast<int>(rejected.size());

        if (providers.verifier != nullptr && !spend(kept.size())) {
            report.halt_reason = "call budget exhausted";
            break;
        }
        for (auto& cand : kept) {
            apply_verification(cand, providers.verifier.get(), policy, &repo.audit, repo.version);
        }

        WriteBackResult written =
            write_back(repo, kept, *providers.summarizer, *providers.embedder);
        rec.written = written.written;
        report.nodes_written += written.written.size();

        // Periodic falsification: revisit standing conjectures.
        if (providers.verifier != nullptr && repo.config.verify.falsifier_period > 0 &&
            static_cast<std::size_t>(it) % repo.config.verify.falsifier_period == 0) {
            for (auto& node : repo.nodes) {
                if (node.status != NodeStatus::conjecture) continue;
                if (!spend(1)) {
                    report.halt_reason = "call budget exhausted";
                    break;
                }
                VerifyOutcome outcome = providers.verifier->check(node.summary);
                NodeStatus target = node.status;
                if (outcome == VerifyOutcome::pass) {
                    target = NodeStatus::verified;
                } else if (outcome == VerifyOutcome::fail || outcome == VerifyOutcome::timeout) {
                    target = NodeStatus::rejected;
                }
                if (target != node.status && status_transition_allowed(node.status, target)) {
                    nlohmann::ordered_json ev;
                    ev["type"] = "falsifier_review";
                    ev["node"] = node.id;
                    ev["outcome"] = to_string(outcome);
                    ev["from"] = to_string(node.status);
                    ev["to"] = to_string(target);
                    repo.audit.append(AuditActor::verification, std::move(ev), repo.version);
                    node.status = target;
                }
            }
            if (report.halt_reason == "call budget exhausted") {
                rec.nodes_total = repo.nodes.size();
                rec.calls_used = report.calls_used;
                report.iterations.push_back(std::move(rec));
                break;
            }
        }

        rec.nodes_total = repo.nodes.size();
        rec.calls_used = report.calls_used;
        report.iterations.push_back(std::move(rec));
    }

    nlohmann::ordered_json ev;
    ev["type"] = "loop_finished";
    ev["iterations"] = report.iterations.size();
    ev["candidates"] = report.candidates_generated;
    ev["written"] = report.nodes_written;
    ev["calls"] = report.calls_used;
    ev["halt_reason"] = report.halt_reason;
    repo.audit.append(AuditActor::loop, std::move(ev), repo.version);
    return report;
}

} // namespace forge
