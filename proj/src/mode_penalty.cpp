#include "modegan/mode_penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "modegan/errors.hpp"

namespace modegan {

// ---------------------------------------------------------------- history

DistanceHistory::DistanceHistory(std::size_t capacity) : buf_(capacity, 0.0) {
    if (capacity == 0) throw ConfigError("penalty history length must be >= 1");
}

void DistanceHistory::push(double distance) {
    buf_[head_] = distance;
    head_ = (head_ + 1) % buf_.size();
    size_ = std::min(size_ + 1, buf_.size());
}

std::vector<double> DistanceHistory::values() const {
    std::vector<double> out;
    out.reserve(size_);
    const std::size_t start = (head_ + buf_.size() - size_) % buf_.size();
    for (std::size_t i = 0; i < size_; ++i) out.push_back(buf_[(start + i) % buf_.size()]);
    return out;
}

double DistanceHistory::mean() const {
    if (size_ == 0) return 0.0;
    const auto v = values();
    return std::accumulate(v.begin(), v.end(), 0.0) / double(size_);
}

// ---------------------------------------------------------------- bank

ModeBank::ModeBank(Matrix modes, std::size_t history_length, bool normalize_weights)
    : modes_(std::move(modes)), k_(history_length), normalize_(normalize_weights) {
    if (modes_.rows() == 0) throw ConfigError("mode bank must hold at least one mode");
    if (k_ == 0) throw ConfigError("penalty history length must be >= 1");
    if (!modes_.all_finite()) throw NumericError("mode bank encodings are not finite");
    centroid_ = column_means(modes_);
    history_.assign(modes_.rows(), DistanceHistory(k_));
    raw_weights_.assign(modes_.rows(), 1.0);
    weights_ = raw_weights_;
}

ModeBank extract_mode_bank(const Matrix& reals, std::size_t count, const AutoEncoder& encoder, SeededRng& rng,
                           std::size_t history_length, bool normalize_weights) {
    if (!encoder.frozen()) throw UsageError("mode bank extraction requires a frozen encoder");
    if (count == 0) throw ConfigError("mode bank size must be >= 1");
    if (count > reals.rows())
        throw ConfigError("mode bank size " + std::to_string(count) + " exceeds the " + std::to_string(reals.rows()) +
                          " available real samples");
    const auto picked = rng.sample_without_replacement(reals.rows(), count);
    return ModeBank(encoder.encode(reals.gather_rows(picked)), history_length, normalize_weights);
}

// ---------------------------------------------------------------- matching

MatchAssignment greedy_match(const ModeBank& bank, const Matrix& generated) {
    if (generated.rows() == 0) throw ConfigError("greedy_match: no generated encodings");
    if (generated.cols() != bank.latent_dim())
        throw DimensionError("greedy_match: encodings have dimension " + std::to_string(generated.cols()) +
                             ", bank " + std::to_string(bank.latent_dim()));

    // Distance to the centroid never changes, so "farthest unmatched" is a
    // walk down this ordering.
    std::vector<double> to_centroid(generated.rows());
    for (std::size_t i = 0; i < generated.rows(); ++i)
        to_centroid[i] = squared_distance(generated.row(i), bank.centroid());
    std::vector<std::size_t> order(generated.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return to_centroid[a] > to_centroid[b]; });

    const std::size_t n_pairs = std::min(generated.rows(), bank.size());
    const std::size_t dim = bank.latent_dim();
    const double* modes = bank.modes().data();
    // Unmatched modes, kept compact by swap-removal; ties compare indices.
    std::vector<std::size_t> open(bank.size());
    std::iota(open.begin(), open.end(), std::size_t{0});
    MatchAssignment out;
    out.pairs.reserve(n_pairs);
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t g = order[p];
        const double* x = generated.data() + g * dim;
        std::size_t best_slot = 0;
        double best_sq = std::numeric_limits<double>::infinity();
        for (std::size_t slot = 0; slot < open.size(); ++slot) {
            const double* r = modes + open[slot] * dim;
            double sq = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = x[d] - r[d];
                sq += diff * diff;
            }
            if (sq < best_sq || (sq == best_sq && open[slot] < open[best_slot])) {
                best_sq = sq;
                best_slot = slot;
            }
        }
        out.pairs.push_back({g, open[best_slot], std::sqrt(best_sq)});
        open[best_slot] = open.back();
        open.pop_back();
    }
    return out;
}

double mode_distance(const ModeBank& bank, const MatchAssignment& assignment) {
    if (assignment.pairs.empty()) return 0.0;
    const auto& w = bank.weights();
    double total = 0.0;
    for (const auto& p : assignment.pairs) total += w.at(p.mode) * p.distance;
    return total / double(assignment.pairs.size());
}

Matrix mode_distance_backward(const ModeBank& bank, const MatchAssignment& assignment, const Matrix& generated) {
    if (generated.cols() != bank.latent_dim()) throw DimensionError("mode_distance_backward: dimension mismatch");
    Matrix grad(generated.rows(), generated.cols());
    if (assignment.pairs.empty()) return grad;
    const double inv_pairs = 1.0 / double(assignment.pairs.size());
    const auto& w = bank.weights();
    for (const auto& p : assignment.pairs) {
        const auto x = generated.row(p.generated);
        const auto r = bank.modes().row(p.mode);
        const double dist = euclidean_distance(x, r);
        if (dist == 0.0) continue;
        const double scale = w.at(p.mode) * inv_pairs / dist;
        auto g = grad.row(p.generated);
        for (std::size_t d = 0; d < g.size(); ++d) g[d] = scale * (x[d] - r[d]);
    }
    return grad;
}

void update_penalty_weights(ModeBank& bank, const MatchAssignment& assignment) {
    for (const auto& p : assignment.pairs) {
        auto& h = bank.history_.at(p.mode);
        h.push(p.distance);
        bank.raw_weights_[p.mode] = h.mean();
    }
    bank.weights_ = bank.raw_weights_;
    if (bank.normalize_) {
        const double mean =
            std::accumulate(bank.raw_weights_.begin(), bank.raw_weights_.end(), 0.0) / double(bank.size());
        if (mean > 0.0)
            for (double& w : bank.weights_) w /= mean;
    }
}

// ---------------------------------------------------------------- switch

PenaltySwitch::PenaltySwitch(std::size_t patience) : patience_(patience) {
    if (patience_ == 0) throw ConfigError("penalty patience must be >= 1");
}

bool PenaltySwitch::observe(const EvalReport& report, std::size_t max_modes) {
    if (!active_) return false;
    streak_ = report.modes_found >= max_modes ? streak_ + 1 : 0;
    if (streak_ >= patience_) active_ = false;
    return active_;
}

}  // namespace modegan
