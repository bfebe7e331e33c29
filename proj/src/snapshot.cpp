#include "forge/snapshot.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "forge/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace forge {

namespace {

constexpr int kFormatVersion = 1;
const char* kDataFiles[] = {"nodes.jsonl", "edges.jsonl", "clusters.jsonl", "audit.jsonl"};

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IntegrityError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw IntegrityError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing snapshot file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ordered_json vec_to_json(const Vec& v) {
    ordered_json arr = ordered_json::array();
    for (float x : v) arr.push_back(x);
    return arr;
}

Vec vec_from_json(const nlohmann::json& arr) {
    Vec v;
    v.reserve(arr.size());
    for (const auto& x : arr) v.push_back(x.get<float>());
    return v;
}

ordered_json node_to_json(const MethodNode& n) {
    ordered_json j;
    j["id"] = n.id;
    j["name"] = n.name;
    j["summary"] = n.summary;
    j["keywords"] = n.keywords;
    j["embedding"] = vec_to_json(n.embedding);
    j["status"] = to_string(n.status);
    ordered_json sources = ordered_json::array();
    for (const auto& s : n.sources) {
        ordered_json sj;
        sj["doc_id"] = s.doc_id;
        sj["segment_id"] = s.segment_id;
        sources.push_back(std::move(sj));
    }
    j["sources"] = std::move(sources);
    j["merged_from"] = n.merged_from;
    return j;
}

MethodNode node_from_json(const nlohmann::json& j) {
    MethodNode n;
    n.id = j.at("id").get<NodeId>();
    n.name = j.at("name").get<std::string>();
    n.summary = j.at("summary").get<std::string>();
    n.keywords = j.at("keywords").get<std::vector<std::string>>();
    n.embedding = vec_from_json(j.at("embedding"));
    n.status = node_status_from_string(j.at("status").get<std::string>());
    for (const auto& sj : j.at("sources")) {
        n.sources.push_back({sj.at("doc_id").get<std::string>(),
                             sj.at("segment_id").get<std::string>()});
    }
    n.merged_from = j.at("merged_from").get<std::vector<NodeId>>();
    return n;
}

ordered_json edge_to_json(const ContributionEdge& e) {
    ordered_json j;
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["rating"] = e.rating;
    j["weight"] = e.weight;
    if (e.share.has_value()) {
        j["share"] = *e.share;
    } else {
        j["share"] = nullptr;
    }
    j["explanation"] = e.explanation;
    j["kind"] = e.kind == EdgeKind::primary ? "primary" : "supporting";
    j["demoted"] = e.demoted;
    return j;
}

ContributionEdge edge_from_json(const nlohmann::json& j) {
    ContributionEdge e;
    e.src = j.at("src").get<NodeId>();
    e.dst = j.at("dst").get<NodeId>();
    e.rating = j.at("rating").get<int>();
    e.weight = j.at("weight").get<double>();
    if (!j.at("share").is_null()) e.share = j.at("share").get<double>();
    e.explanation = j.at("explanation").get<std::string>();
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "primary") {
        e.kind = EdgeKind::primary;
    } else if (kind == "supporting") {
        e.kind = EdgeKind::supporting;
    } else {
        throw ValidationError("unknown edge kind: " + kind);
    }
    e.demoted = j.at("demoted").get<bool>();
    return e;
}

ordered_json cluster_to_json(const ClusterNode& c) {
    ordered_json j;
    j["id"] = c.id;
    j["level"] = c.level;
    j["children"] = c.children;
    j["summary"] = c.summary;
    j["embedding"] = vec_to_json(c.summary_embedding);
    return j;
}

ClusterNode cluster_from_json(const nlohmann::json& j) {
    ClusterNode c;
    c.id = j.at("id").get<ClusterId>();
    c.level = j.at("level").get<int>();
    c.children = j.at("children").get<std::vector<std::uint64_t>>();
    c.summary = j.at("summary").get<std::string>();
    c.summary_embedding = vec_from_json(j.at("embedding"));
    return c;
}

ordered_json audit_to_json(const AuditRecord& r) {
    ordered_json j;
    j["sequence"] = r.sequence;
    j["timestamp"] = r.timestamp;
    j["actor"] = to_string(r.actor);
    j["event"] = r.event;
    j["snapshot_version"] = r.snapshot_version;
    return j;
}

// Takes ordered_json so free-form event payloads keep their key order; a
// plain json parameter would silently re-sort them during conversion.
AuditRecord audit_from_json(const ordered_json& j) {
    AuditRecord r;
    r.sequence = j.at("sequence").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.actor = audit_actor_from_string(j.at("actor").get<std::string>());
    r.event = j.at("event");
    r.snapshot_version = j.at("snapshot_version").get<std::uint64_t>();
    return r;
}

std::vector<ordered_json> parse_jsonl(const std::string& content, const std::string& name) {
    std::vector<ordered_json> rows;
    std::istringstream in(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(ordered_json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(name + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

ordered_json schedule_to_json(const ClusterSchedule& s) {
    ordered_json j;
    j["levels"] = s.levels;
    j["k1"] = s.k1;
    j["kn"] = s.kn;
    j["kmin"] = s.kmin;
    j["rho"] = s.rho;
    j["counts"] = s.counts;
    return j;
}

ClusterSchedule schedule_from_json(const nlohmann::json& j) {
    ClusterSchedule s;
    s.levels = j.at("levels").get<int>();
    s.k1 = j.at("k1").get<int>();
    s.kn = j.at("kn").get<int>();
    s.kmin = j.at("kmin").get<int>();
    s.rho = j.at("rho").get<double>();
    s.counts = j.at("counts").get<std::vector<int>>();
    return s;
}

} // namespace

void save_snapshot(const Repository& repo, const std::string& dir) {
    fs::create_directories(dir);
    fs::path base(dir);

    std::string bodies[4];
    {
        std::ostringstream out;
        for (const auto& n : repo.nodes) out << node_to_json(n).dump() << "\n";
        bodies[0] = out.str();
    }
    {
        std::ostringstream out;
        for (const auto& e : repo.edges) out << edge_to_json(e).dump() << "\n";
        bodies[1] = out.str();
    }
    {
        std::ostringstream out;
        for (const ClusterNode* c : repo.abstraction.all_clusters()) {
            out << cluster_to_json(*c).dump() << "\n";
        }
        bodies[2] = out.str();
    }
    {
        std::ostringstream out;
        for (const auto& r : repo.audit.records()) out << audit_to_json(r).dump() << "\n";
        bodies[3] = out.str();
    }

    ordered_json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["config_hash"] = repo.config.hash();
    manifest["snapshot_version"] = repo.version;
    ordered_json counts;
    counts["nodes"] = repo.nodes.size();
    counts["edges"] = repo.edges.size();
    counts["clusters"] = repo.abstraction.cluster_count();
    counts["audit"] = repo.audit.size();
    manifest["counts"] = std::move(counts);
    ordered_json state;
    state["next_node_id"] = repo.next_node_id;
    state["next_candidate_id"] = repo.next_candidate_id;
    state["next_cluster_id"] = repo.abstraction.next_cluster_id();
    state["insertions_since_rebuild"] = repo.abstraction.insertions_since_rebuild();
    manifest["state"] = std::move(state);
    manifest["schedule"] = schedule_to_json(repo.abstraction.schedule());
    ordered_json files = ordered_json::array();
    for (int i = 0; i < 4; ++i) {
        ordered_json f;
        f["path"] = kDataFiles[i];
        f["hash"] = to_hex(fnv1a64(bodies[i]));
        files.push_back(std::move(f));
    }
    manifest["files"] = std::move(files);

    for (int i = 0; i < 4; ++i) {
        write_file_atomic(base / kDataFiles[i], bodies[i]);
    }
    write_file_atomic(base / "manifest.json", manifest.dump(2) + "\n");
}

Repository load_snapshot(const std::string& dir, const Config& config) {
    fs::path base(dir);
    fs::path manifest_path = base / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw NotFoundError("snapshot manifest missing: " + manifest_path.string());
    }
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("manifest.json: " + std::string(e.what()));
    }

    if (manifest.at("format_version").get<int>() != kFormatVersion) {
        throw ValidationError("manifest.json: unsupported format_version " +
                              manifest.at("format_version").dump());
    }
    std::string want_hash = config.hash();
    std::string have_hash = manifest.at("config_hash").get<std::string>();
    if (want_hash != have_hash) {
        throw ConflictError("manifest.json: config hash " + have_hash +
                            " does not match the active config " + want_hash);
    }

    std::map<std::string, std::string> contents;
    for (const auto& f : manifest.at("files")) {
        std::string name = f.at("path").get<std::string>();
        std::string body = read_file(base / name);
        std::string hash = to_hex(fnv1a64(body));
        if (hash != f.at("hash").get<std::string>()) {
            throw IntegrityError(name + ": content hash " + hash + " does not match manifest");
        }
        contents[name] = std::move(body);
    }
    for (const char* name : kDataFiles) {
        if (contents.find(name) == contents.end()) {
            throw ValidationError(std::string("manifest.json: missing file entry for ") + name);
        }
    }

    Repository repo;
    repo.config = config;
    repo.version = manifest.at("snapshot_version").get<std::uint64_t>();

    for (const auto& row : parse_jsonl(contents["nodes.jsonl"], "nodes.jsonl")) {
        repo.nodes.push_back(node_from_json(row));
    }
    for (const auto& row : parse_jsonl(contents["edges.jsonl"], "edges.jsonl")) {
        repo.edges.push_back(edge_from_json(row));
    }
    std::vector<ClusterNode> clusters;
    for (const auto& row : parse_jsonl(contents["clusters.jsonl"], "clusters.jsonl")) {
        clusters.push_back(cluster_from_json(row));
    }
    std::vector<AuditRecord> audit_rows;
    for (const auto& row : parse_jsonl(contents["audit.jsonl"], "audit.jsonl")) {
        audit_rows.push_back(audit_from_json(row));
    }

    const auto& counts = manifest.at("counts");
    if (repo.nodes.size() != counts.at("nodes").get<std::size_t>()) {
        throw IntegrityError("nodes.jsonl: row count does not match manifest");
    }
    if (repo.edges.size() != counts.at("edges").get<std::size_t>()) {
        throw IntegrityError("edges.jsonl: row count does not match manifest");
    }
    if (clusters.size() != counts.at("clusters").get<std::size_t>()) {
        throw IntegrityError("clusters.jsonl: row count does not match manifest");
    }
    if (audit_rows.size() != counts.at("audit").get<std::size_t>()) {
        throw IntegrityError("audit.jsonl: row count does not match manifest");
    }

    repo.audit.restore(std::move(audit_rows));

    std::vector<NodeId> ids;
    ids.reserve(repo.nodes.size());
    for (const auto& n : repo.nodes) ids.push_back(n.id);
    repo.provenance = ProvenanceTree::from_edges(ids, repo.edges);

    const auto& state = manifest.at("state");
    repo.next_node_id = state.at("next_node_id").get<std::uint64_t>();
    repo.next_candidate_id = state.at("next_candidate_id").get<std::uint64_t>();
    repo.abstraction = AbstractionTree::restore(
        clusters, schedule_from_json(manifest.at("schedule")),
        state.at("next_cluster_id").get<std::uint64_t>(),
        state.at("insertions_since_rebuild").get<std::size_t>());

    repo.rebuild_indexes();
    repo.check_invariants();
    return repo;
}

} // namespace forge
