#pragma once

#include <memory>
#include <string>

#include "forge/abstraction.hpp"
#include "forge/config.hpp"
#include "forge/embed.hpp"
#include "forge/ingest.hpp"
#include "forge/quality.hpp"
#include "forge/synthesis.hpp"

namespace forge {

// One bundle of everything pluggable, wired from the provider block of the
// config. The embedder is wrapped in a cache when cache_path is set; the
// verifier may be absent (verification then labels conjectures).
struct Providers {
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<Extractor> extractor;
    std::unique_ptr<Summarizer> summarizer;
    std::unique_ptr<Generator> generator;
    std::unique_ptr<Scorer> scorer;
    std::unique_ptr<Verifier> verifier;

    CachingEmbedder* cache = nullptr;  // non-null iff the embedder is cached
    std::string cache_path;

    // Writes the embed cache back to cache_path, if both exist.
    void save_cache() const;
};

Providers make_providers(const Config& config);

} // namespace forge
