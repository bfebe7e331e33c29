#pragma once

#include <cstdint>
#include <vector>

#include "forge/core.hpp"

namespace forge {

struct KMeansParams {
    std::size_t batch_size = 64;
    std::size_t max_iterations = 50;
    double tolerance = 1e-6;  // max squared center movement that counts as converged
};

// Mini-batch k-means over unit vectors with seeded k-means++ initialization.
// Deterministic for a fixed seed. Every cluster is non-empty: stragglers are
// repaired by peeling the farthest member off the largest cluster. Returns
// member positions per cluster, each sorted; clusters ordered by smallest
// member position.
std::vector<std::vector<std::size_t>> minibatch_kmeans(const std::vector<Vec>& points,
                                                       std::size_t k,
                                                       std::uint64_t seed,
                                                       const KMeansParams& params = {});

} // namespace forge
