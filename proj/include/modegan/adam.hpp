#pragma once

#include <cstdint>

#include "modegan/dense_net.hpp"

namespace modegan {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// Moment estimates for one network. Single writer: the loop that owns the net.
class AdamState {
public:
    AdamState(const DenseNet& net, AdamConfig config);

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t step_count() const noexcept { return step_; }
    const Gradients& first_moment() const noexcept { return m_; }
    const Gradients& second_moment() const noexcept { return v_; }

    friend void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

private:
    AdamConfig config_;
    std::uint64_t step_ = 0;
    Gradients m_;
    Gradients v_;
};

/// One bias-corrected Adam update. Throws NumericError naming the offending
/// parameter if any gradient entry is non-finite; nothing is modified then.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

}  // namespace modegan
