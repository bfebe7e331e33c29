#pragma once

#include <string>

#include "forge/repository.hpp"

namespace forge {

// Writes manifest.json plus nodes/edges/clusters/audit JSONL files into
// `dir`. Every data file is hashed into the manifest; each file lands via a
// temp-write-then-rename, with the manifest last, so a torn snapshot is
// never loadable.
void save_snapshot(const Repository& repo, const std::string& dir);

// Restores a repository and re-derives the indexes. Refuses (naming the
// offending file) on format mismatch, a config hash that differs from
// `config`, a data file whose hash or row count disagrees with the manifest,
// or any violated structural invariant.
Repository load_snapshot(const std::string& dir, const Config& config);

} // namespace forge
