#include "modegan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "modegan/errors.hpp"

namespace modegan {

ModeCoverage modes_and_hqs(const Matrix& samples, const GaussianMixture& mix, double sigma_mult,
                           std::size_t hit_min) {
    if (samples.rows() > 0 && samples.cols() != mix.dim())
        throw DimensionError("modes_and_hqs: samples have dimension " + std::to_string(samples.cols()) +
                             ", mixture " + std::to_string(mix.dim()));
    ModeCoverage cov;
    cov.per_mode_hits.assign(mix.component_count(), 0);
    std::size_t good = 0;
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        const auto nearest = nearest_mode(mix, samples.row(r));
        if (nearest.distance <= sigma_mult * mix.stds()[nearest.index]) {
            ++good;
            ++cov.per_mode_hits[nearest.index];
        }
    }
    cov.modes_found = std::size_t(std::count_if(cov.per_mode_hits.begin(), cov.per_mode_hits.end(),
                                                [hit_min](std::size_t h) { return h >= hit_min; }));
    cov.hqs = samples.rows() ? double(good) / double(samples.rows()) : 0.0;
    return cov;
}

// ---------------------------------------------------------------- histogram

GridHistogram::GridHistogram(std::vector<double> lo, std::vector<double> hi, std::size_t bins)
    : lo_(std::move(lo)), hi_(std::move(hi)), bins_(bins) {
    if (bins_ == 0) throw ConfigError("histogram needs at least one bin per axis");
    if (lo_.empty() || lo_.size() != hi_.size()) throw DimensionError("histogram box bounds disagree in dimension");
    for (std::size_t d = 0; d < lo_.size(); ++d)
        if (!(hi_[d] > lo_[d])) throw ConfigError("histogram box has zero extent on an axis");
    std::size_t cells = 1;
    for (std::size_t d = 0; d < lo_.size(); ++d) cells *= bins_;
    counts_.assign(cells + 1, 0.0);
}

GridHistogram GridHistogram::around(const Matrix& reals, std::size_t bins, double pad_fraction) {
    if (reals.rows() == 0) throw ConfigError("histogram reference set is empty");
    std::vector<double> lo(reals.cols(), std::numeric_limits<double>::infinity());
    std::vector<double> hi(reals.cols(), -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < reals.rows(); ++r)
        for (std::size_t d = 0; d < reals.cols(); ++d) {
            lo[d] = std::min(lo[d], reals(r, d));
            hi[d] = std::max(hi[d], reals(r, d));
        }
    for (std::size_t d = 0; d < lo.size(); ++d) {
        const double extent = hi[d] - lo[d];
        const double pad = extent > 0.0 ? pad_fraction * extent : 0.5;
        lo[d] -= pad;
        hi[d] += pad;
    }
    return GridHistogram(std::move(lo), std::move(hi), bins);
}

GridHistogram GridHistogram::empty_like() const { return GridHistogram(lo_, hi_, bins_); }

void GridHistogram::add(std::span<const double> point) {
    if (point.size() != lo_.size()) throw DimensionError("histogram point dimension mismatch");
    std::size_t cell = 0;
    bool inside = true;
    for (std::size_t d = 0; d < lo_.size() && inside; ++d) {
        const double x = point[d];
        if (!(x >= lo_[d] && x <= hi_[d])) {
            inside = false;
            break;
        }
        auto b = std::size_t((x - lo_[d]) / (hi_[d] - lo_[d]) * double(bins_));
        b = std::min(b, bins_ - 1);
        cell = cell * bins_ + b;
    }
    counts_[inside ? cell : counts_.size() - 1] += 1.0;
    total_ += 1.0;
}

void GridHistogram::add_all(const Matrix& points) {
    for (std::size_t r = 0; r < points.rows(); ++r) add(points.row(r));
}

double jsd(std::span<const double> p_counts, std::span<const double> q_counts, double smoothing) {
    if (p_counts.size() != q_counts.size() || p_counts.empty()) throw DimensionError("jsd: histograms differ in size");
    const double cells = double(p_counts.size());
    const double p_total = std::accumulate(p_counts.begin(), p_counts.end(), 0.0) + smoothing * cells;
    const double q_total = std::accumulate(q_counts.begin(), q_counts.end(), 0.0) + smoothing * cells;
    if (!(p_total > 0.0) || !(q_total > 0.0)) throw ConfigError("jsd: empty histogram");
    double kl_pm = 0.0;
    double kl_qm = 0.0;
    for (std::size_t i = 0; i < p_counts.size(); ++i) {
        const double p = (p_counts[i] + smoothing) / p_total;
        const double q = (q_counts[i] + smoothing) / q_total;
        const double m = 0.5 * (p + q);
        if (p > 0.0) kl_pm += p * std::log(p / m);
        if (q > 0.0) kl_qm += q * std::log(q / m);
    }
    const double value = 0.5 * (kl_pm + kl_qm);
    return std::clamp(value, 0.0, std::numbers::ln2);
}

double jsd_grid(const Matrix& reals, const Matrix& gens, std::size_t bins, double smoothing) {
    if (reals.rows() == 0 || gens.rows() == 0) throw ConfigError("jsd_grid: both sample sets must be nonempty");
    if (reals.cols() != gens.cols())
        throw DimensionError("jsd_grid: real dim " + std::to_string(reals.cols()) + " vs generated dim " +
                             std::to_string(gens.cols()));
    GridHistogram real_hist = GridHistogram::around(reals, bins);
    GridHistogram gen_hist = real_hist.empty_like();
    real_hist.add_all(reals);
    gen_hist.add_all(gens);
    return jsd(real_hist.counts(), gen_hist.counts(), smoothing);
}

EvalReport evaluate(const Matrix& gens, const GaussianMixture& mix, const Matrix& reference,
                    const MetricsConfig& cfg) {
    EvalReport report;
    auto cov = modes_and_hqs(gens, mix, cfg.sigma_mult, cfg.hit_min);
    report.modes_found = cov.modes_found;
    report.hqs = cov.hqs;
    report.per_mode_hits = std::move(cov.per_mode_hits);
    report.n_samples = gens.rows();
    report.jsd = jsd_grid(reference, gens, cfg.bins_for(mix.dim()), cfg.smoothing);
    return report;
}

MetricSummary summarize(std::span<const double> values) {
    if (values.size() < 2) throw ConfigError("need at least two values to summarise");
    MetricSummary s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / double(values.size() - 1));
    return s;
}

AggregateReport aggregate_runs(std::span<const EvalReport> reports) {
    if (reports.size() < 2) throw ConfigError("aggregate_runs needs at least two reports, got " +
                                              std::to_string(reports.size()));
    std::vector<double> modes, hqs, js;
    for (const auto& r : reports) {
        modes.push_back(double(r.modes_found));
        hqs.push_back(r.hqs);
        js.push_back(r.jsd);
    }
    return {reports.size(), summarize(modes), summarize(hqs), summarize(js)};
}

}  // namespace modegan
