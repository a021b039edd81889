#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "modegan/autoencoder.hpp"
#include "modegan/matrix.hpp"
#include "modegan/metrics.hpp"
#include "modegan/rng.hpp"

namespace modegan {

/// Fixed-capacity FIFO of the most recent matched distances of one mode.
class DistanceHistory {
public:
    explicit DistanceHistory(std::size_t capacity);

    void push(double distance);
    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return buf_.size(); }
    bool empty() const noexcept { return size_ == 0; }
    /// Mean of the stored entries; 0 when empty.
    double mean() const;
    /// Oldest first.
    std::vector<double> values() const;

private:
    std::vector<double> buf_;
    std::size_t head_ = 0;  // next write slot
    std::size_t size_ = 0;
};

struct MatchAssignment;

/// The fixed set of encoded real samples that stand for the target modes,
/// with one penalty weight and distance history per mode.
class ModeBank {
public:
    /// `history_length` is k, the number of past matched distances averaged
    /// into a weight. With `normalize_weights` the effective weights are
    /// rescaled to mean one after every update.
    ModeBank(Matrix modes, std::size_t history_length, bool normalize_weights = false);

    std::size_t size() const noexcept { return modes_.rows(); }
    std::size_t latent_dim() const noexcept { return modes_.cols(); }
    std::size_t history_length() const noexcept { return k_; }
    bool normalizes_weights() const noexcept { return normalize_; }

    const Matrix& modes() const noexcept { return modes_; }
    std::span<const double> centroid() const noexcept { return centroid_; }
    /// Effective penalty weights used by the distance loss.
    const std::vector<double>& weights() const noexcept { return weights_; }
    const DistanceHistory& history(std::size_t mode) const { return history_.at(mode); }

    friend void update_penalty_weights(ModeBank& bank, const MatchAssignment& assignment);

private:
    Matrix modes_;
    std::size_t k_;
    bool normalize_;
    std::vector<double> centroid_;
    std::vector<DistanceHistory> history_;
    std::vector<double> raw_weights_;
    std::vector<double> weights_;
};

/// Draw `count` reals uniformly without replacement and encode them once.
/// Requires a frozen encoder (UsageError) and count <= reals.rows() (ConfigError).
ModeBank extract_mode_bank(const Matrix& reals, std::size_t count, const AutoEncoder& encoder, SeededRng& rng,
                           std::size_t history_length, bool normalize_weights = false);

struct MatchedPair {
    std::size_t generated;
    std::size_t mode;
    double distance;
};

/// Pairs in the order they were formed.
struct MatchAssignment {
    std::vector<MatchedPair> pairs;
};

/// Greedy one-to-one matching of generated encodings to bank modes.
/// Repeatedly takes the unmatched generated sample farthest from the bank
/// centroid and pairs it with its nearest unmatched mode, until either side
/// runs out. Ties resolve to the lowest index.
MatchAssignment greedy_match(const ModeBank& bank, const Matrix& generated);

/// Mean over pairs of weight(mode) * distance. Weights are constants here.
double mode_distance(const ModeBank& bank, const MatchAssignment& assignment);

/// Gradient of mode_distance w.r.t. the generated encodings with the
/// assignment held fixed. Unmatched rows and coincident pairs get zero.
Matrix mode_distance_backward(const ModeBank& bank, const MatchAssignment& assignment, const Matrix& generated);

/// Push each matched distance into its mode's history and reset that mode's
/// weight to the history mean. Unmatched modes keep their weight.
void update_penalty_weights(ModeBank& bank, const MatchAssignment& assignment);

/// Turns the penalty off for good once every mode has been found in
/// `patience` consecutive evaluations.
class PenaltySwitch {
public:
    explicit PenaltySwitch(std::size_t patience = 3);

    bool active() const noexcept { return active_; }
    std::size_t streak() const noexcept { return streak_; }
    /// Feeds one evaluation; returns whether the penalty stays active.
    bool observe(const EvalReport& report, std::size_t max_modes);

private:
    std::size_t patience_;
    std::size_t streak_ = 0;
    bool active_ = true;
};

}  // namespace modegan
