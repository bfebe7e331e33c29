#include "forge/repository.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "forge/util.hpp"

namespace forge {

const MethodNode* Repository::find_node(NodeId id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

MethodNode* Repository::find_node(NodeId id) {
    for (auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

std::map<std::string, std::size_t> Repository::status_histogram() const {
    std::map<std::string, std::size_t> hist;
    for (const auto& n : nodes) hist[to_string(n.status)] += 1;
    return hist;
}

std::function<const MethodNode*(NodeId)> make_resolver(const Repository& repo) {
    return [&repo](NodeId id) { return repo.find_node(id); };
}

Repository Repository::build_from_corpus(const std::vector<Document>& docs, const Config& config,
                                         Embedder& embedder, Extractor& extractor,
                                         Summarizer& summarizer) {
    config.validate();
    Repository repo;
    repo.config = config;

    LengthUnit unit = config.ingest.length_unit == "tokens" ? LengthUnit::tokens
                                                            : LengthUnit::chars;

    // Segment every document, then extract concurrently; results land in
    // per-segment slots so thread timing cannot reorder anything.
    std::vector<Segment> segments;
    for (const auto& doc : docs) {
        auto segs = segment_document(doc, config.ingest.segment_limit, unit);
        segments.insert(segments.end(), segs.begin(), segs.end());
    }
    std::vector<ExtractionRecord> records(segments.size());
    parallel_chunks(segments.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            records[i] = run_extraction(segments[i], extractor);
    });

    repo.audit.append(AuditActor::ingest,
                      {{"event", "corpus_ingested"},
                       {"documents", docs.size()},
                       {"segments", segments.size()}},
                      repo.version);

    // Mentions: one node per METHOD declaration, ids in segment order.
    std::vector<MethodNode> mentions;
    std::vector<ContributionEdge> raw_edges;
    for (const auto& rec : records) {
        if (rec.rejected) {
            nlohmann::ordered_json diags = nlohmann::ordered_json::array();
            for (const auto& d : rec.diagnostics) diags.push_back(d);
            repo.audit.append(AuditActor::ingest,
                              {{"event", "record_rejected"},
                               {"segment", rec.segment_id},
                               {"diagnostics", diags}},
                              repo.version);
            continue;
        }
        for (const auto& d : rec.diagnostics)
            repo.audit.append(AuditActor::ingest,
                              {{"event", "extraction_note"},
                               {"segment", rec.segment_id},
                               {"note", d}},
                              repo.version);

        std::map<std::string, NodeId> local;
        auto add_method = [&](const RawMethod& m) {
            MethodNode node;
            node.id = repo.next_node_id++;
            node.name = m.name;
            node.summary = m.summary;
            node.keywords = tokenize(m.name);
            node.status = NodeStatus::extracted;
            node.sources.push_back(SourceRef{rec.doc_id, rec.segment_id});
            node.embedding =
                embedder.embed(embedding_text(node.name, node.summary, node.keywords));
            local[m.name] = node.id;
            mentions.push_back(std::move(node));
        };
        for (const auto& m : rec.pre_methods) add_method(m);
        for (const auto& m : rec.post_methods) add_method(m);

        for (const auto& r : rec.relations) {
            ContributionEdge e;
            e.src = local.at(r.src);
            e.dst = local.at(r.dst);
            e.rating = r.rating;
            e.weight = rating_to_weight(r.rating);
            e.explanation = r.explanation;
            raw_edges.push_back(std::move(e));
        }
    }

    // Merge near-duplicate mentions and rewrite the edges onto canonicals.
    DedupResult dd = dedup_corpus(std::move(mentions), std::move(raw_edges),
                                  config.dedup.merge_threshold, embedder);
    for (const auto& ev : dd.merges) {
        nlohmann::ordered_json members = nlohmann::ordered_json::array();
        for (NodeId id : ev.members) members.push_back(id);
        repo.audit.append(AuditActor::dedup,
                          {{"event", "nodes_merged"},
                           {"members", members},
                           {"canonical", ev.canonical},
                           {"threshold", ev.delta}},
                          repo.version);
    }
    repo.nodes = std::move(dd.nodes);
    repo.edges = std::move(dd.edges);

    std::vector<NodeId> ids;
    ids.reserve(repo.nodes.size());
    for (const auto& n : repo.nodes) ids.push_back(n.id);
    std::vector<DemotionEvent> demotions;
    repo.provenance = ProvenanceTree::build(ids, repo.edges, &demotions);
    for (const auto& d : demotions)
        repo.audit.append(AuditActor::dedup,
                          {{"event", "edge_demoted"},
                           {"src", d.src},
                           {"dst", d.dst},
                           {"weight", d.weight},
                           {"reason", "primary edge would close a backbone cycle"}},
                          repo.version);

    if (!repo.nodes.empty()) {
        ClusterSchedule schedule =
            make_schedule(repo.nodes.size(), config.abstraction.levels,
                          config.abstraction.initial_clusters, config.abstraction.final_clusters,
                          config.abstraction.min_clusters);
        ClusterParams params;
        params.batch_size = config.abstraction.batch_size;
        params.max_iterations = config.abstraction.max_iterations;
        params.rebuild_after = config.abstraction.rebuild_after;
        repo.abstraction = AbstractionTree::build(repo.nodes, schedule, config.seed, summarizer,
                                                  embedder, params);
    }

    repo.version = 1;
    repo.rebuild_indexes();
    repo.audit.append(AuditActor::ingest,
                      {{"event", "build_complete"},
                       {"nodes", repo.nodes.size()},
                       {"edges", repo.edges.size()},
                       {"clusters", repo.abstraction.cluster_count()}},
                      repo.version);
    return repo;
}

void Repository::rebuild_indexes() {
    leaf_index_ = std::make_unique<SimilarityIndex>(
        config.ann.enabled ? IndexMode::ann : IndexMode::exact,
        AnnParams{config.ann.nlist, config.ann.nprobe});
    for (const auto& n : nodes) leaf_index_->add(n.id, n.embedding);
    leaf_index_->build(config.seed);

    cluster_index_ = std::make_unique<SimilarityIndex>(IndexMode::exact);
    for (const auto* c : abstraction.all_clusters())
        cluster_index_->add(c->id, c->summary_embedding);
    cluster_index_->build(config.seed);
}

const SimilarityIndex& Repository::leaf_index() const {
    if (!leaf_index_) throw IntegrityError("leaf index not built");
    return *leaf_index_;
}

const SimilarityIndex& Repository::cluster_index() const {
    if (!cluster_index_) throw IntegrityError("cluster index not built");
    return *cluster_index_;
}

RetrievalContext Repository::run_query(const std::string& text, Embedder& embedder,
                                       const QueryOverrides& overrides) const {
    Vec q = embedder.embed(text);
    FunnelParams params;
    params.k1 = overrides.k1.value_or(config.funnel.top_budget);
    params.eta = overrides.eta.value_or(config.funnel.decay);
    int leaf_budget = overrides.k_leaf.value_or(config.funnel.leaf_budget);
    if (leaf_budget > 0) params.k_leaf = leaf_budget;

    RetrievalContext ctx =
        funnel_retrieve(abstraction, cluster_index(), leaf_index(), text, q, params);
    collect_context(provenance, ctx, overrides.tau.value_or(config.backtrack.influence_threshold),
                    overrides.max_depth.value_or(config.backtrack.max_depth), config.epsilon);
    return ctx;
}

void Repository::check_invariants() const {
    std::set<NodeId> ids;
    for (const auto& n : nodes) {
        if (!ids.insert(n.id).second)
            throw IntegrityError("duplicate node id " + std::to_string(n.id));
        if (n.embedding.size() != static_cast<std::size_t>(config.dimension))
            throw IntegrityError("node " + std::to_string(n.id) + " has wrong dimension");
        double norm = 0.0;
        for (double v : n.embedding) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0 && std::abs(norm - 1.0) > 1e-6)
            throw IntegrityError("node " + std::to_string(n.id) + " embedding not unit length");
    }
    for (const auto& n : nodes)
        for (NodeId m : n.merged_from)
            if (ids.count(m))
                throw IntegrityError("merged id " + std::to_string(m) + " still live");
    std::set<std::pair<NodeId, NodeId>> pairs;
    std::set<NodeId> primary_seen;
    std::map<NodeId, double> share_sum;
    std::map<NodeId, bool> share_missing;
    for (const auto& e : edges) {
        if (e.src == e.dst) throw IntegrityError("self-loop on " + std::to_string(e.src));
        if (!ids.count(e.src) || !ids.count(e.dst))
            throw IntegrityError("edge endpoint missing: " + std::to_string(e.src) + " -> " +
                                 std::to_string(e.dst));
        if (!pairs.insert({e.src, e.dst}).second)
            throw IntegrityError("parallel edge " + std::to_string(e.src) + " -> " +
                                 std::to_string(e.dst));
        if (std::abs(e.weight - rating_to_weight(e.rating)) > 1e-12)
            throw IntegrityError("edge weight out of lockstep with rating");
        if (e.kind == EdgeKind::primary && !primary_seen.insert(e.dst).second)
            throw IntegrityError("two primary edges into " + std::to_string(e.dst));
        if (e.share.has_value())
            share_sum[e.dst] += *e.share;
        else
            share_missing[e.dst] = true;
    }
    for (const auto& [dst, sum] : share_sum) {
        if (share_missing.count(dst))
            throw IntegrityError("node " + std::to_string(dst) + " has partial shares");
        // The epsilon guard leaves share sums a hair under one; the cushion
        // keeps accumulated double rounding from tripping the bound.
        if (std::abs(sum - 1.0) > 1e-9 + 1e-14)
            throw IntegrityError("shares into " + std::to_string(dst) + " sum to " +
                                 std::to_string(sum));
    }
    if (!provenance.backbone_acyclic()) throw IntegrityError("backbone cycle");
    if (!provenance.primary_maximal())
        throw IntegrityError("supporting edge outweighs primary without demotion flag");
    abstraction.validate_partition();
    audit.validate();
}

} // namespace forge
