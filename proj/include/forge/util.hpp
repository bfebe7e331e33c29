#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

// Lowercased alphanumeric runs; every other byte (including non-ASCII) separates.
std::vector<std::string> tokenize(std::string_view text);

std::string lowercase(std::string_view text);
std::string trim(std::string_view text);

// Uniform double in [0,1) from the top 53 bits of the generator. Kept out of
// <random> distributions so streams are identical across standard libraries.
inline double rand01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t rand_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

// Runs fn(begin, end) over contiguous chunks, possibly on several threads.
// Caller owns determinism: results must land in pre-sized slots by index.
void parallel_chunks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

std::string format_fixed(double value, int digits);

std::string iso_timestamp_utc();

} // namespace forge
