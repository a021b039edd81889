#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "modegan/gaussian_mixture.hpp"
#include "modegan/matrix.hpp"

namespace modegan {

struct MetricsConfig {
    double sigma_mult = 3.0;  // high-quality radius in component stds
    std::size_t hit_min = 1;  // high-quality hits needed to count a mode as found
    std::size_t bins = 0;     // histogram bins per axis; 0 = 30 in 2D, 15 in 3D
    double smoothing = 1e-10;

    std::size_t bins_for(std::size_t dim) const { return bins ? bins : (dim <= 2 ? 30 : 15); }
};

/// One evaluation pass over a set of generated samples. jsd is in nats.
struct EvalReport {
    std::size_t modes_found = 0;
    double hqs = 0.0;
    double jsd = 0.0;
    std::vector<std::size_t> per_mode_hits;  // high-quality samples per component
    std::size_t n_samples = 0;
};

struct ModeCoverage {
    std::size_t modes_found = 0;
    double hqs = 0.0;
    std::vector<std::size_t> per_mode_hits;
};

/// A sample is high quality when it lies within sigma_mult * std of its
/// nearest component mean.
ModeCoverage modes_and_hqs(const Matrix& samples, const GaussianMixture& mix, double sigma_mult = 3.0,
                           std::size_t hit_min = 1);

/// Uniform grid over an axis-aligned box plus a single overflow cell for
/// points outside it.
class GridHistogram {
public:
    GridHistogram(std::vector<double> lo, std::vector<double> hi, std::size_t bins);

    /// Box around `reals` padded by `pad_fraction` of the extent on each axis.
    static GridHistogram around(const Matrix& reals, std::size_t bins, double pad_fraction = 0.05);

    void add(std::span<const double> point);
    void add_all(const Matrix& points);

    std::size_t bins() const noexcept { return bins_; }
    std::size_t dim() const noexcept { return lo_.size(); }
    const std::vector<double>& lo() const noexcept { return lo_; }
    const std::vector<double>& hi() const noexcept { return hi_; }
    /// In-box cells in row-major order; the last entry is the overflow cell.
    const std::vector<double>& counts() const noexcept { return counts_; }
    double in_box() const noexcept { return total_ - counts_.back(); }
    double total() const noexcept { return total_; }
    /// Same box, counts reset.
    GridHistogram empty_like() const;

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::size_t bins_;
    std::vector<double> counts_;
    double total_ = 0.0;
};

/// Jensen-Shannon divergence (nats) between two count vectors after adding
/// `smoothing` to every cell and normalising.
double jsd(std::span<const double> p_counts, std::span<const double> q_counts, double smoothing = 1e-10);

/// JSD between grid histograms of `reals` and `gens` on the padded real box.
double jsd_grid(const Matrix& reals, const Matrix& gens, std::size_t bins, double smoothing = 1e-10);

/// Full evaluation of generated samples against the mixture and a real reference set.
EvalReport evaluate(const Matrix& gens, const GaussianMixture& mix, const Matrix& reference,
                    const MetricsConfig& cfg = {});

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
};

struct AggregateReport {
    std::size_t runs = 0;
    MetricSummary modes;
    MetricSummary hqs;
    MetricSummary jsd;
};

MetricSummary summarize(std::span<const double> values);
/// Throws ConfigError for fewer than two reports.
AggregateReport aggregate_runs(std::span<const EvalReport> reports);

}  // namespace modegan
