#include "modegan/rng.hpp"

#include <numeric>

#include "modegan/errors.hpp"

namespace modegan {
namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

SeededRng SeededRng::derive(std::uint64_t stream) const {
    return SeededRng(mix(mix(seed_) ^ mix(stream + 0x632BE59BD9B4E019ULL)));
}

double SeededRng::uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double SeededRng::normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
}

double SeededRng::gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

std::size_t SeededRng::index(std::size_t n) {
    if (n == 0) throw ConfigError("index() over an empty range");
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

std::vector<std::size_t> SeededRng::sample_without_replacement(std::size_t n, std::size_t count) {
    if (count > n) throw ConfigError("cannot draw " + std::to_string(count) + " of " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

}  // namespace modegan
