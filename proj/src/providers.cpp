#include "forge/providers.hpp"

#include <filesystem>

namespace forge {

void Providers::save_cache() const {
    if (cache != nullptr && !cache_path.empty()) {
        cache->save(cache_path);
    }
}

Providers make_providers(const Config& config) {
    Providers p;

    std::unique_ptr<Embedder> base;
    if (config.providers.embedder == "stub") {
        base = std::make_unique<StubEmbedder>(config.dimension);
    } else if (config.providers.embedder == "http") {
        if (config.providers.embed_endpoint.empty()) {
            throw ValidationError("http embedder requires an endpoint");
        }
        base = std::make_unique<HttpEmbedder>(config.providers.embed_endpoint, config.dimension);
    } else {
        throw ValidationError("unknown embedder provider: " + config.providers.embedder);
    }
    if (!config.cache_path.empty()) {
        auto caching = std::make_unique<CachingEmbedder>(std::move(base));
        if (std::filesystem::exists(config.cache_path)) {
            caching->load(config.cache_path);
        }
        p.cache = caching.get();
        p.cache_path = config.cache_path;
        p.embedder = std::move(caching);
    } else {
        p.embedder = std::move(base);
    }

    if (config.providers.extractor == "rules") {
        p.extractor = std::make_unique<RuleBasedExtractor>();
    } else {
        throw ValidationError("unknown extractor provider: " + config.providers.extractor);
    }

    if (config.providers.summarizer == "stub") {
        p.summarizer = std::make_unique<StubSummarizer>();
    } else {
        throw ValidationError("unknown summarizer provider: " + config.providers.summarizer);
    }

    if (config.providers.generator == "stub") {
        p.generator = std::make_unique<StubGenerator>(config.synthesis.max_parents);
    } else {
        throw ValidationError("unknown generator provider: " + config.providers.generator);
    }

    if (config.providers.scorer == "stub") {
        p.scorer = std::make_unique<StubScorer>(p.embedder.get());
    } else {
        throw ValidationError("unknown scorer provider: " + config.providers.scorer);
    }

    if (config.providers.verifier == "null") {
        p.verifier = nullptr;
    } else if (config.providers.verifier == "pass") {
        p.verifier = std::make_unique<AlwaysPassVerifier>();
    } else if (config.providers.verifier == "fail") {
        p.verifier = std::make_unique<AlwaysFailVerifier>();
    } else {
        throw ValidationError("unknown verifier provider: " + config.providers.verifier);
    }

    return p;
}

} // namespace forge
