#include "forge/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "forge/kmeans.hpp"
#include "forge/util.hpp"

namespace forge {

namespace {

void l2_normalize(Vec& v) {
    double norm = 0.0;
    for (float x : v) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw ProviderError("embedding has zero norm", false);
    for (float& x : v) x = static_cast<float>(x / norm);
}

} // namespace

StubEmbedder::StubEmbedder(int dimension) : dim_(dimension) {
    if (dimension < 1) throw ValidationError("embedding dimension must be positive");
}

std::string StubEmbedder::id() const {
    return "stub-hash-" + std::to_string(dim_);
}

Vec StubEmbedder::embed(std::string_view text) {
    Vec v(static_cast<std::size_t>(dim_), 0.0f);
    auto tokens = tokenize(text);
    if (tokens.empty()) {
        v[0] = 1.0f;
        return v;
    }
    for (const auto& tok : tokens) {
        std::size_t bucket = static_cast<std::size_t>(fnv1a64(tok) % static_cast<std::uint64_t>(dim_));
        v[bucket] += 1.0f;
    }
    l2_normalize(v);
    return v;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, int dimension)
    : endpoint_(std::move(endpoint)), dim_(dimension) {
    if (dimension < 1) throw ValidationError("embedding dimension must be positive");
    std::string rest;
    if (endpoint_.rfind("http://", 0) == 0) {
        rest = endpoint_.substr(7);
    } else {
        throw ValidationError("embed endpoint must start with http://: " + endpoint_);
    }
    auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    auto colon = hostport.find(':');
    host_ = colon == std::string::npos ? hostport : hostport.substr(0, colon);
    port_ = colon == std::string::npos ? 80 : std::stoi(hostport.substr(colon + 1));
    if (host_.empty()) throw ValidationError("embed endpoint missing host: " + endpoint_);
}

std::string HttpEmbedder::id() const {
    return "http-" + endpoint_ + "-" + std::to_string(dim_);
}

Vec HttpEmbedder::embed(std::string_view text) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(10, 0);
    auto res = client.Post(path_, std::string(text), "text/plain");
    if (!res)
        throw ProviderError("embed endpoint unreachable: " + endpoint_, true);
    if (res->status != 200)
        throw ProviderError("embed endpoint returned status " + std::to_string(res->status), true);

    Vec v;
    v.reserve(static_cast<std::size_t>(dim_));
    std::stringstream ss(res->body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stof(trim(item)));
        } catch (const std::exception&) {
            throw ProviderError("embed endpoint returned a non-numeric component", false);
        }
    }
    if (static_cast<int>(v.size()) != dim_)
        throw ProviderError("embed endpoint returned " + std::to_string(v.size()) +
                                " components, expected " + std::to_string(dim_),
                            false);
    l2_normalize(v);
    return v;
}

CachingEmbedder::CachingEmbedder(std::unique_ptr<Embedder> inner) : inner_(std::move(inner)) {}

std::string CachingEmbedder::id() const { return inner_->id(); }
int CachingEmbedder::dimension() const { return inner_->dimension(); }

Vec CachingEmbedder::embed(std::string_view text) {
    std::string key = inner_->id() + ":" + to_hex(fnv1a64(text));
    auto it = cache_.find(key);
    if (it != cache_.end()) {
        ++hits_;
        return it->second;
    }
    ++misses_;
    Vec v = inner_->embed(text);
    cache_.emplace(std::move(key), v);
    return v;
}

void CachingEmbedder::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) return;  // a missing cache file simply starts cold
    std::string line;
    while (std::getline(in, line)) {
        auto sep = line.find('\t');
        if (sep == std::string::npos) continue;
        std::string key = line.substr(0, sep);
        Vec v;
        std::stringstream ss(line.substr(sep + 1));
        std::string item;
        while (std::getline(ss, item, ' '))
            if (!item.empty()) v.push_back(std::stof(item));
        if (static_cast<int>(v.size()) == dimension()) cache_[key] = std::move(v);
    }
}

void CachingEmbedder::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& [key, v] : cache_) {
        out << key << '\t';
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out << ' ';
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v[i]));
            out << buf;
        }
        out << '\n';
    }
}

double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw ValidationError("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    if (a.empty()) throw ValidationError("cosine: empty vector");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine: zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

SimilarityIndex::SimilarityIndex(IndexMode mode, AnnParams params)
    : mode_(mode), params_(params) {}

void SimilarityIndex::add(std::uint64_t id, Vec vector) {
    if (!vectors_.empty() && vectors_.begin()->second.size() != vector.size())
        throw ValidationError("index: dimension mismatch on add");
    auto [it, inserted] = vectors_.emplace(id, std::move(vector));
    if (!inserted) throw IntegrityError("index: duplicate id " + std::to_string(id));
    built_ = false;
}

void SimilarityIndex::remove(std::uint64_t id) {
    vectors_.erase(id);
    built_ = false;
}

bool SimilarityIndex::contains(std::uint64_t id) const { return vectors_.count(id) > 0; }

const Vec& SimilarityIndex::vector_of(std::uint64_t id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw NotFoundError("index: unknown id " + std::to_string(id));
    return it->second;
}

std::vector<std::uint64_t> SimilarityIndex::ids() const {
    std::vector<std::uint64_t> out;
    out.reserve(vectors_.size());
    for (const auto& [id, v] : vectors_) out.push_back(id);
    return out;
}

void SimilarityIndex::build(std::uint64_t seed) {
    if (mode_ == IndexMode::exact) {
        built_ = true;
        return;
    }
    centroids_.clear();
    cells_.clear();
    if (vectors_.empty()) {
        built_ = true;
        return;
    }
    std::vector<std::uint64_t> order;
    std::vector<Vec> points;
    order.reserve(vectors_.size());
    points.reserve(vectors_.size());
    for (const auto& [id, v] : vectors_) {
        order.push_back(id);
        points.push_back(v);
    }
    std::size_t nlist = params_.nlist;
    if (nlist == 0)
        nlist = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(points.size()))));
    nlist = std::max<std::size_t>(1, std::min(nlist, points.size()));

    auto partition = minibatch_kmeans(points, nlist, seed);
    for (const auto& members : partition) {
        std::vector<double> center(points[0].size(), 0.0);
        std::vector<std::uint64_t> cell;
        cell.reserve(members.size());
        for (std::size_t pos : members) {
            cell.push_back(order[pos]);
            for (std::size_t d = 0; d < center.size(); ++d) center[d] += points[pos][d];
        }
        Vec c(center.size());
        for (std::size_t d = 0; d < center.size(); ++d)
            c[d] = static_cast<float>(center[d] / static_cast<double>(members.size()));
        centroids_.push_back(std::move(c));
        cells_.push_back(std::move(cell));
    }
    built_ = true;
}

std::vector<std::pair<std::uint64_t, double>> SimilarityIndex::scan(
    const Vec& query, std::span<const std::uint64_t> pool, std::size_t k) const {
    if (k < 1) throw ValidationError("top_k needs a positive k");
    std::vector<std::pair<std::uint64_t, double>> scored;
    scored.reserve(pool.size());
    for (std::uint64_t id : pool) {
        auto it = vectors_.find(id);
        if (it == vectors_.end()) throw NotFoundError("index: unknown id " + std::to_string(id));
        scored.emplace_back(id, cosine(query, it->second));
        comparisons_.fetch_add(1, std::memory_order_relaxed);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<std::pair<std::uint64_t, double>> SimilarityIndex::top_k(const Vec& query,
                                                                     std::size_t k) const {
    if (mode_ == IndexMode::exact || !built_ || centroids_.empty()) {
        std::vector<std::uint64_t> all = ids();
        return scan(query, all, k);
    }
    // Probe the nearest coarse cells, then scan their members exactly.
    std::vector<std::pair<std::size_t, double>> coarse;
    coarse.reserve(centroids_.size());
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
        coarse.emplace_back(c, cosine(query, centroids_[c]));
        comparisons_.fetch_add(1, std::memory_order_relaxed);
    }
    std::sort(coarse.begin(), coarse.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::size_t probe = std::min(std::max<std::size_t>(1, params_.nprobe), coarse.size());
    std::vector<std::uint64_t> pool;
    for (std::size_t i = 0; i < probe; ++i)
        pool.insert(pool.end(), cells_[coarse[i].first].begin(), cells_[coarse[i].first].end());
    std::sort(pool.begin(), pool.end());
    return scan(query, pool, k);
}

std::vector<std::pair<std::uint64_t, double>> SimilarityIndex::top_k(
    const Vec& query, std::span<const std::uint64_t> pool, std::size_t k) const {
    return scan(query, pool, k);
}

} // namespace forge
