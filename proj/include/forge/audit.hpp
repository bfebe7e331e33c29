#pragma once

/*
 * Append-only audit trail.
 *
 * DESIGN INVARIANTS
 * 1. Sequence numbers start at 1 and are gap-free.
 * 2. Records are never mutated or removed once appended.
 * 3. Each record carries the snapshot version it was written under.
 */

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/core.hpp"

namespace forge {

enum class AuditActor { ingest, dedup, retrieval, synthesis, scoring, verification, writeback, loop };

const char* to_string(AuditActor a);
AuditActor audit_actor_from_string(const std::string& s);

struct AuditRecord {
    std::uint64_t sequence = 0;
    std::string timestamp;  // ISO-8601 UTC
    AuditActor actor = AuditActor::ingest;
    nlohmann::ordered_json event;
    std::uint64_t snapshot_version = 0;
};

class AuditLog {
public:
    std::uint64_t append(AuditActor actor, nlohmann::ordered_json event,
                         std::uint64_t snapshot_version);

    const std::vector<AuditRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    // Restore path; enforces invariant 1.
    void restore(std::vector<AuditRecord> records);

    // Throws IntegrityError when sequences are not 1..N.
    void validate() const;

private:
    std::vector<AuditRecord> records_;
};

} // namespace forge
