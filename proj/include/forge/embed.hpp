#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/core.hpp"

namespace forge {

// Deterministic text -> unit vector provider. Identical text must yield an
// identical vector; all providers emit the configured dimension.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual int dimension() const = 0;
    virtual Vec embed(std::string_view text) = 0;
};

// Feature-hashing bag of tokens. Empty or token-free text maps to the fixed
// canonical unit vector e0.
class StubEmbedder : public Embedder {
public:
    explicit StubEmbedder(int dimension);
    std::string id() const override;
    int dimension() const override { return dim_; }
    Vec embed(std::string_view text) override;

private:
    int dim_;
};

// POSTs the raw text to an endpoint and expects `dimension` comma-separated
// floats back. The reply is normalized; a zero vector or a short reply is a
// provider error. Connection failures are retriable.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(std::string endpoint, int dimension);
    std::string id() const override;
    int dimension() const override { return dim_; }
    Vec embed(std::string_view text) override;

private:
    std::string host_;
    int port_;
    std::string path_;
    std::string endpoint_;
    int dim_;
};

// Content-addressed cache in front of another embedder. Keys combine the
// inner provider id and a hash of the text, so switching providers cannot
// serve stale vectors.
class CachingEmbedder : public Embedder {
public:
    explicit CachingEmbedder(std::unique_ptr<Embedder> inner);
    std::string id() const override;
    int dimension() const override;
    Vec embed(std::string_view text) override;

    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    void load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::unique_ptr<Embedder> inner_;
    std::map<std::string, Vec> cache_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

// Cosine similarity, accumulated in double and clamped to [-1, 1].
// Throws ValidationError on dimension mismatch or a zero vector.
double cosine(const Vec& a, const Vec& b);

enum class IndexMode { exact, ann };

struct AnnParams {
    std::size_t nlist = 0;   // 0: ceil(sqrt(N)) at build time
    std::size_t nprobe = 8;  // coarse cells scanned per query
};

// Flat similarity index over (id, vector) entries. Exact mode scans the pool;
// ann mode routes whole-index queries through an inverted-file structure.
// Subset queries are always exact. comparisons() counts every dot product.
class SimilarityIndex {
public:
    explicit SimilarityIndex(IndexMode mode = IndexMode::exact, AnnParams params = {});

    void add(std::uint64_t id, Vec vector);
    void remove(std::uint64_t id);
    // Builds the coarse structure for ann mode; exact mode resets nothing.
    void build(std::uint64_t seed);

    std::vector<std::pair<std::uint64_t, double>> top_k(const Vec& query, std::size_t k) const;
    std::vector<std::pair<std::uint64_t, double>> top_k(const Vec& query,
                                                        std::span<const std::uint64_t> pool,
                                                        std::size_t k) const;

    std::uint64_t comparisons() const { return comparisons_.load(); }
    void reset_comparisons() { comparisons_.store(0); }

    IndexMode mode() const { return mode_; }
    std::size_t size() const { return vectors_.size(); }
    bool contains(std::uint64_t id) const;
    const Vec& vector_of(std::uint64_t id) const;
    std::vector<std::uint64_t> ids() const;

private:
    std::vector<std::pair<std::uint64_t, double>> scan(const Vec& query,
                                                       std::span<const std::uint64_t> pool,
                                                       std::size_t k) const;

    IndexMode mode_;
    AnnParams params_;
    std::map<std::uint64_t, Vec> vectors_;
    std::vector<Vec> centroids_;
    std::vector<std::vector<std::uint64_t>> cells_;
    bool built_ = false;
    mutable std::atomic<std::uint64_t> comparisons_{0};
};

} // namespace forge
