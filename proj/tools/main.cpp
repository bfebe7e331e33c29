#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forge/bench.hpp"
#include "forge/loop.hpp"
#include "forge/providers.hpp"
#include "forge/quality.hpp"
#include "forge/snapshot.hpp"
#include "forge/synthesis.hpp"
#include "forge/util.hpp"

namespace {

using namespace forge;

Config load_config(const std::string& path) {
    Config cfg = path.empty() ? Config{} : Config::from_file(path);
    cfg.apply_env_overrides();
    cfg.validate();
    return cfg;
}

std::string sim6(double x) { return format_fixed(x, 6); }

void print_context(const RetrievalContext& ctx, const Repository& repo) {
    std::cout << "query: " << ctx.query_text << "\n";
    std::cout << "trace:\n" << trace_to_text(ctx.trace);
    std::cout << "leaves:\n";
    for (const auto& [id, sim] : ctx.leaves) {
        const MethodNode* n = repo.find_node(id);
        std::cout << id << " " << sim6(sim) << " " << (n ? n->name : "?") << "\n";
    }
    std::cout << "ancestors:\n";
    for (const auto& hit : ctx.ancestors) {
        const MethodNode* n = repo.find_node(hit.ancestor);
        std::cout << hit.ancestor << " depth=" << hit.depth << " influence="
                  << sim6(hit.influence) << " via=" << hit.leaf << " "
                  << (n ? n->name : "?") << "\n";
    }
}

void print_candidate(const CandidateInnovation& c) {
    std::cout << "candidate " << c.id << " op=" << c.operator_id << " score=" << sim6(c.score)
              << " gate=" << (c.gate ? "pass" : "fail") << " status=" << to_string(c.status)
              << " parents=";
    for (std::size_t i = 0; i < c.parents.size(); ++i) {
        if (i > 0) std::cout << ",";
        std::cout << c.parents[i].id << ":" << sim6(c.parents[i].share);
    }
    std::cout << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"method knowledge engine"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "config JSON path")->envname("METHODFORGE_CONFIG");

    // build
    auto* build = app.add_subcommand("build", "ingest a corpus into a snapshot");
    std::string build_corpus, build_out;
    build->add_option("--corpus", build_corpus, "corpus JSONL path")->required();
    build->add_option("--out", build_out, "snapshot directory")->required();

    // query
    auto* query = app.add_subcommand("query", "funnel retrieval with provenance context");
    std::string query_snapshot, query_text;
    QueryOverrides overrides;
    int q_k1 = 0, q_kleaf = 0, q_maxdepth = -1;
    double q_eta = 0.0, q_tau = 0.0;
    query->add_option("--snapshot", query_snapshot, "snapshot directory")->required();
    query->add_option("--text", query_text, "query text")->required();
    auto* opt_k1 = query->add_option("--k1", q_k1, "top-level budget");
    auto* opt_eta = query->add_option("--eta", q_eta, "budget decay");
    auto* opt_kleaf = query->add_option("--k-leaf", q_kleaf, "leaf-stage budget");
    auto* opt_tau = query->add_option("--tau", q_tau, "influence threshold");
    auto* opt_maxdepth = query->add_option("--max-depth", q_maxdepth, "backtrack depth cap");

    // innovate
    auto* innov = app.add_subcommand("innovate", "synthesize, score, verify, write back");
    std::string in_snapshot, in_query, in_operator, in_out;
    int in_count = 0;
    bool in_dry = false;
    innov->add_option("--snapshot", in_snapshot, "snapshot directory")->required();
    innov->add_option("--query", in_query, "gap question")->required();
    innov->add_option("--count", in_count, "candidates to request");
    innov->add_option("--operator", in_operator, "force an operator id");
    innov->add_option("--out", in_out, "write the updated snapshot here");
    innov->add_flag("--dry-run", in_dry, "skip write-back and snapshot update");

    // loop
    auto* loop = app.add_subcommand("loop", "run the innovation loop");
    std::string loop_snapshot, loop_out;
    int loop_iterations = 1;
    std::uint64_t loop_max_calls = 0, loop_max_candidates = 0;
    loop->add_option("--snapshot", loop_snapshot, "snapshot directory")->required();
    loop->add_option("--iterations", loop_iterations, "iterations to run")->required();
    auto* opt_calls = loop->add_option("--max-calls", loop_max_calls, "provider call budget");
    auto* opt_cands = loop->add_option("--max-candidates", loop_max_candidates, "candidate budget");
    loop->add_option("--out", loop_out, "write the updated snapshot here");

    // stats
    auto* stats = app.add_subcommand("stats", "snapshot summary");
    std::string stats_snapshot;
    stats->add_option("--snapshot", stats_snapshot, "snapshot directory")->required();

    // export
    auto* exp = app.add_subcommand("export", "render provenance, abstraction or a trace");
    std::string exp_snapshot, exp_what, exp_text, exp_out;
    exp->add_option("--snapshot", exp_snapshot, "snapshot directory")->required();
    exp->add_option("--what", exp_what, "provenance | abstraction | trace")->required();
    exp->add_option("--text", exp_text, "query text for trace export");
    exp->add_option("--out", exp_out, "output file (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "funnel vs flat retrieval cost");
    std::string bench_sizes = "256,512,1024";
    int bench_queries = 20, bench_dim = 32, bench_levels = 3;
    std::uint64_t bench_seed = 1;
    bench->add_option("--sizes", bench_sizes, "comma-separated corpus sizes");
    bench->add_option("--queries", bench_queries, "queries per size");
    bench->add_option("--dimension", bench_dim, "embedding dimension");
    bench->add_option("--levels", bench_levels, "hierarchy levels");
    bench->add_option("--seed", bench_seed, "rng seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }

    if (build->parsed()) {
        Config cfg = load_config(config_path);
        Providers prov = make_providers(cfg);
        std::vector<Document> docs = read_corpus_jsonl(build_corpus);
        Repository repo = Repository::build_from_corpus(docs, cfg, *prov.embedder,
                                                        *prov.extractor, *prov.summarizer);
        save_snapshot(repo, build_out);
        prov.save_cache();
        std::cout << "build: " << repo.nodes.size() << " nodes, " << repo.edges.size()
                  << " edges, " << repo.abstraction.cluster_count() << " clusters, version "
                  << repo.version << "\n";
        return 0;
    }

    if (query->parsed()) {
        Config cfg = load_config(config_path);
        Providers prov = make_providers(cfg);
        Repository repo = load_snapshot(query_snapshot, cfg);
        if (opt_k1->count() > 0) overrides.k1 = q_k1;
        if (opt_eta->count() > 0) overrides.eta = q_eta;
        if (opt_kleaf->count() > 0) overrides.k_leaf = q_kleaf;
        if (opt_tau->count() > 0) overrides.tau = q_tau;
        if (opt_maxdepth->count() > 0) overrides.max_depth = q_maxdepth;
        RetrievalContext ctx = repo.run_query(query_text, *prov.embedder, overrides);
        print_context(ctx, repo);
        prov.save_cache();
        return 0;
    }

    if (innov->parsed()) {
        Config cfg = load_config(config_path);
        Providers prov = make_providers(cfg);
        Repository repo = load_snapshot(in_snapshot, cfg);
        RetrievalContext ctx = repo.run_query(in_query, *prov.embedder);
        SynthesisView view{ctx, repo.abstraction, repo.provenance};
        std::optional<std::string> forced;
        if (!in_operator.empty()) forced = in_operator;
        const Operator& op =
            select_operator(default_operators(), view, &repo.audit, repo.version, forced);
        std::cout << "operator: " << op.id << "\n";
        int count = in_count > 0 ? in_count : cfg.synthesis.candidates;
        InnovateResult made =
            innovate(view, op, in_query, count, *prov.generator, make_resolver(repo),
                     cfg.epsilon, &repo.next_candidate_id, &repo.audit, repo.version);
        for (const auto& s : made.shortfalls) std::cout << "shortfall: " << s << "\n";
        for (auto& cand : made.candidates) {
            score_candidate(cand, ctx, repo, *prov.scorer, cfg, &repo.audit, repo.version);
        }
        auto [kept, rejected] = prune(std::move(made.candidates), cfg.scoring.threshold);
        VerifyPolicy policy = verify_policy_from_string(cfg.verify.policy);
        for (auto& cand : kept) {
            apply_verification(cand, prov.verifier.get(), policy, &repo.audit, repo.version);
        }
        for (const auto& c : kept) print_candidate(c);
        for (const auto& c : rejected) print_candidate(c);
        std::cout << "kept: " << kept.size() << " rejected: " << rejected.size() << "\n";
        if (!in_dry) {
            WriteBackResult wrote = write_back(repo, kept, *prov.summarizer, *prov.embedder);
            for (NodeId id : wrote.written) {
                const MethodNode* n = repo.find_node(id);
                if (n == nullptr) continue;
                std::cout << "node " << id << " " << n->name << " status=" << to_string(n->status)
                          << "\n";
            }
            save_snapshot(repo, in_out.empty() ? in_snapshot : in_out);
        }
        std::cout << "version: " << repo.version << "\n";
        prov.save_cache();
        return 0;
    }

    if (loop->parsed()) {
        Config cfg = load_config(config_path);
        Providers prov = make_providers(cfg);
        Repository repo = load_snapshot(loop_snapshot, cfg);
        LoopBudgets budgets;
        budgets.max_calls = opt_calls->count() > 0 ? loop_max_calls : cfg.budgets.max_calls;
        budgets.max_candidates =
            opt_cands->count() > 0 ? loop_max_candidates : cfg.budgets.max_candidates;
        LoopReport report = run_loop(repo, loop_iterations, budgets, prov);
        for (const auto& it : report.iterations) {
            std::cout << "iter " << it.iteration << " op=" << (it.operator_id.empty() ? "-" : it.operator_id)
                      << " generated=" << it.generated << " kept=" << it.kept << " rejected="
                      << it.rejected << " written=" << it.written.size() << " nodes="
                      << it.nodes_total << " calls=" << it.calls_used << "\n";
        }
        std::cout << "halt: " << report.halt_reason << "\n";
        save_snapshot(repo, loop_out.empty() ? loop_snapshot : loop_out);
        prov.save_cache();
        return 0;
    }

    if (stats->parsed()) {
        Config cfg = load_config(config_path);
        Repository repo = load_snapshot(stats_snapshot, cfg);
        std::cout << "nodes: " << repo.nodes.size() << "\n";
        std::cout << "edges: " << repo.edges.size() << "\n";
        std::cout << "clusters: " << repo.abstraction.cluster_count() << "\n";
        std::cout << "levels: " << repo.abstraction.level_count() << "\n";
        std::cout << "version: " << repo.version << "\n";
        std::cout << "audit_records: " << repo.audit.size() << "\n";
        for (const auto& [status, count] : repo.status_histogram()) {
            std::cout << "status " << status << ": " << count << "\n";
        }
        return 0;
    }

    if (exp->parsed()) {
        Config cfg = load_config(config_path);
        Providers prov = make_providers(cfg);
        Repository repo = load_snapshot(exp_snapshot, cfg);
        std::string rendered;
        if (exp_what == "provenance") {
            rendered = provenance_dot(repo.nodes, repo.edges);
        } else if (exp_what == "abstraction") {
            rendered = repo.abstraction.dot(repo.nodes);
        } else if (exp_what == "trace") {
            if (exp_text.empty()) {
                std::cerr << "error: usage: trace export needs --text\n";
                return 2;
            }
            RetrievalContext ctx = repo.run_query(exp_text, *prov.embedder);
            rendered = trace_to_text(ctx.trace);
        } else {
            std::cerr << "error: usage: unknown export target " << exp_what << "\n";
            return 2;
        }
        if (exp_out.empty()) {
            std::cout << rendered;
        } else {
            std::ofstream out(exp_out, std::ios::binary | std::ios::trunc);
            if (!out) throw IntegrityError("cannot write " + exp_out);
            out << rendered;
        }
        return 0;
    }

    if (bench->parsed()) {
        BenchOptions opts;
        opts.sizes.clear();
        std::istringstream parts(bench_sizes);
        std::string part;
        while (std::getline(parts, part, ',')) {
            if (!part.empty()) opts.sizes.push_back(static_cast<std::size_t>(std::stoull(part)));
        }
        opts.queries = bench_queries;
        opts.dimension = bench_dim;
        opts.levels = bench_levels;
        opts.seed = bench_seed;
        std::cout << bench_table(run_bench(opts));
        return 0;
    }

    std::cerr << "error: usage: no subcommand\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const forge::ProviderError& e) {
        std::cerr << "error: provider: " << e.what() << "\n";
        return e.retriable() ? 3 : 1;
    } catch (const forge::ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    } catch (const forge::IntegrityError& e) {
        std::cerr << "error: integrity: " << e.what() << "\n";
        return 1;
    } catch (const forge::NotFoundError& e) {
        std::cerr << "error: not_found: " << e.what() << "\n";
        return 1;
    } catch (const forge::ConflictError& e) {
        std::cerr << "error: conflict: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
