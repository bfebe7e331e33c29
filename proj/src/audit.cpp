#include "forge/audit.hpp"

#include "forge/util.hpp"

namespace forge {

const char* to_string(AuditActor a) {
    switch (a) {
        case AuditActor::ingest: return "ingest";
        case AuditActor::dedup: return "dedup";
        case AuditActor::retrieval: return "retrieval";
        case AuditActor::synthesis: return "synthesis";
        case AuditActor::scoring: return "scoring";
        case AuditActor::verification: return "verification";
        case AuditActor::writeback: return "writeback";
        case AuditActor::loop: return "loop";
    }
    return "unknown";
}

AuditActor audit_actor_from_string(const std::string& s) {
    if (s == "ingest") return AuditActor::ingest;
    if (s == "dedup") return AuditActor::dedup;
    if (s == "retrieval") return AuditActor::retrieval;
    if (s == "synthesis") return AuditActor::synthesis;
    if (s == "scoring") return AuditActor::scoring;
    if (s == "verification") return AuditActor::verification;
    if (s == "writeback") return AuditActor::writeback;
    if (s == "loop") return AuditActor::loop;
    throw ValidationError("unknown audit actor: " + s);
}

std::uint64_t AuditLog::append(AuditActor actor, nlohmann::ordered_json event,
                               std::uint64_t snapshot_version) {
    AuditRecord rec;
    rec.sequence = records_.size() + 1;
    rec.timestamp = iso_timestamp_utc();
    rec.actor = actor;
    rec.event = std::move(event);
    rec.snapshot_version = snapshot_version;
    records_.push_back(std::move(rec));
    return records_.back().sequence;
}

void AuditLog::restore(std::vector<AuditRecord> records) {
    records_ = std::move(records);
    validate();
}

void AuditLog::validate() const {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].sequence != i + 1)
            throw IntegrityError("audit sequence gap at position " + std::to_string(i) +
                                 ": expected " + std::to_string(i + 1) + ", found " +
                                 std::to_string(records_[i].sequence));
    }
}

} // namespace forge
