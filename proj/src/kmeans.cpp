#include "forge/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "forge/util.hpp"

namespace forge {

namespace {

double sq_dist(const Vec& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = static_cast<double>(a[i]) - b[i];
        d += diff * diff;
    }
    return d;
}

std::size_t nearest_center(const Vec& p, const std::vector<std::vector<double>>& centers) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        double d = sq_dist(p, centers[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<std::vector<double>> seed_centers(const std::vector<Vec>& points, std::size_t k,
                                              std::mt19937_64& rng) {
    std::size_t n = points.size();
    std::vector<bool> chosen(n, false);
    std::vector<std::vector<double>> centers;
    centers.reserve(k);

    auto lift = [](const Vec& v) {
        return std::vector<double>(v.begin(), v.end());
    };

    std::size_t first = rand_index(rng, n);
    chosen[first] = true;
    centers.push_back(lift(points[first]));

    std::vector<double> dist(n, 0.0);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) {
                dist[i] = 0.0;
                continue;
            }
            double d = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) d = std::min(d, sq_dist(points[i], c));
            dist[i] = d;
            total += d;
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double u = rand01(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += dist[i];
                if (!chosen[i] && cum >= u) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == n) {
            // All remaining points coincide with chosen centers; take the
            // smallest unchosen index so duplicates still seed distinct cells.
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        chosen[pick] = true;
        centers.push_back(lift(points[pick]));
    }
    return centers;
}

} // namespace

std::vector<std::vector<std::size_t>> minibatch_kmeans(const std::vector<Vec>& points,
                                                       std::size_t k,
                                                       std::uint64_t seed,
                                                       const KMeansParams& params) {
    std::size_t n = points.size();
    if (n == 0) throw ValidationError("kmeans: empty item set");
    if (k == 0) throw ValidationError("kmeans: k must be positive");
    k = std::min(k, n);
    for (const auto& p : points)
        if (p.size() != points[0].size())
            throw ValidationError("kmeans: inconsistent dimensions");

    std::mt19937_64 rng(seed);
    auto centers = seed_centers(points, k, rng);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
        double moved = 0.0;
        std::size_t batch = std::min(params.batch_size, n);
        for (std::size_t b = 0; b < batch; ++b) {
            std::size_t i = rand_index(rng, n);
            std::size_t c = nearest_center(points[i], centers);
            counts[c] += 1;
            double lr = 1.0 / static_cast<double>(counts[c]);
            auto& center = centers[c];
            double step = 0.0;
            for (std::size_t d = 0; d < center.size(); ++d) {
                double delta = (static_cast<double>(points[i][d]) - center[d]) * lr;
                center[d] += delta;
                step += delta * delta;
            }
            moved = std::max(moved, step);
        }
        if (moved < params.tolerance) break;
    }

    std::vector<std::vector<std::size_t>> clusters(k);
    for (std::size_t i = 0; i < n; ++i)
        clusters[nearest_center(points[i], centers)].push_back(i);

    // Repair: peel the farthest member of the largest cluster into each empty
    // one. k <= n guarantees a donor with at least two members exists.
    for (std::size_t c = 0; c < k; ++c) {
        if (!clusters[c].empty()) continue;
        std::size_t donor = k;
        for (std::size_t d = 0; d < k; ++d) {
            if (clusters[d].size() < 2) continue;
            if (donor == k || clusters[d].size() > clusters[donor].size()) donor = d;
        }
        if (donor == k) throw IntegrityError("kmeans: cannot repair empty cluster");
        std::size_t far_pos = 0;
        double far_d = -1.0;
        for (std::size_t m = 0; m < clusters[donor].size(); ++m) {
            double d = sq_dist(points[clusters[donor][m]], centers[donor]);
            if (d > far_d) {
                far_d = d;
                far_pos = m;
            }
        }
        std::size_t moved_pt = clusters[donor][far_pos];
        clusters[donor].erase(clusters[donor].begin() + static_cast<std::ptrdiff_t>(far_pos));
        clusters[c].push_back(moved_pt);
        centers[c].assign(points[moved_pt].begin(), points[moved_pt].end());
    }

    for (auto& members : clusters) std::sort(members.begin(), members.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return clusters;
}

} // namespace forge
