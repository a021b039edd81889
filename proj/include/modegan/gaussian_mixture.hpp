#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modegan/matrix.hpp"
#include "modegan/rng.hpp"

namespace modegan {

enum class Benchmark { Ring8, Grid25, Random25, Cube27 };

std::string to_string(Benchmark b);
Benchmark parse_benchmark(std::string_view name);
inline constexpr Benchmark kAllBenchmarks[] = {Benchmark::Ring8, Benchmark::Grid25, Benchmark::Random25,
                                               Benchmark::Cube27};

/// Geometry of the synthetic benchmarks.
struct BenchmarkParams {
    double ring_radius = 2.0;
    double ring_std = 0.02;
    double grid_spacing = 2.0;
    double grid_std = 0.05;
    double random_half_width = 4.0;  // means uniform in [-w, w]^2
    double random_std = 0.05;
    double random_concentration = 5.0;  // symmetric Dirichlet over the weights
    double random_min_separation = 0.5;  // rejection threshold between means
    double cube_spacing = 2.0;
    double cube_std = 0.05;
};

/// Isotropic Gaussian mixture. Immutable once built; safe to share.
class GaussianMixture {
public:
    /// Weights are renormalised to sum to one. Throws ConfigError on
    /// inconsistent sizes, negative stds or non-positive weight mass.
    GaussianMixture(Matrix means, std::vector<double> stds, std::vector<double> weights);

    std::size_t dim() const noexcept { return means_.cols(); }
    std::size_t component_count() const noexcept { return means_.rows(); }
    const Matrix& means() const noexcept { return means_; }
    std::span<const double> mean(std::size_t k) const { return means_.row(k); }
    const std::vector<double>& stds() const noexcept { return stds_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

private:
    Matrix means_;
    std::vector<double> stds_;
    std::vector<double> weights_;
};

/// Only Random25 consumes `rng`.
GaussianMixture make_benchmark(Benchmark which, SeededRng& rng, const BenchmarkParams& params = {});

/// n draws: component by weight, then isotropic noise around its mean.
Matrix sample(const GaussianMixture& mix, std::size_t n, SeededRng& rng);

struct NearestMode {
    std::size_t index;
    double distance;
};

/// Closest component mean; ties go to the lowest index.
NearestMode nearest_mode(const GaussianMixture& mix, std::span<const double> point);

/// Smallest distance between any two component means.
double min_mean_separation(const GaussianMixture& mix);

/// Sample dump: header "x0,x1[,x2]" then one row per sample, 17 significant digits.
void write_samples_csv(std::ostream& out, const Matrix& samples);
void write_samples_csv(const std::string& path, const Matrix& samples);

/// Parses a sample dump. Lines starting with '#' are skipped. Throws
/// ConfigError with the 1-based line number on a malformed row or when no
/// sample rows are present.
Matrix read_samples_csv(std::istream& in);
Matrix read_samples_csv(const std::string& path);

}  // namespace modegan
