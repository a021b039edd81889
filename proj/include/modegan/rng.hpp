#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace modegan {

/// Seeded pseudo-random source. Identical seed plus identical call sequence
/// yields an identical stream on a given platform.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent generator for a named sub-stream. Does not advance this one.
    SeededRng derive(std::uint64_t stream) const;

    double uniform(double lo = 0.0, double hi = 1.0);
    double normal(double mean = 0.0, double stddev = 1.0);
    double gamma(double shape);
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);
    /// First `count` entries of a uniform random permutation of [0, n).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Named sub-streams so that unrelated consumers never perturb each other.
namespace streams {
inline constexpr std::uint64_t kBenchmark = 1;
inline constexpr std::uint64_t kTrainData = 2;
inline constexpr std::uint64_t kAutoencoder = 3;
inline constexpr std::uint64_t kModeBank = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kTraining = 6;
inline constexpr std::uint64_t kEval = 7;
inline constexpr std::uint64_t kReference = 8;
}  // namespace streams

}  // namespace modegan
