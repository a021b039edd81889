#include "modegan/adam.hpp"

#include <cmath>

#include "modegan/errors.hpp"

namespace modegan {

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("adam learning_rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("adam beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("adam beta2 must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
}

AdamState::AdamState(const DenseNet& net, AdamConfig config)
    : config_(config), m_(net.zero_gradients()), v_(net.zero_gradients()) {
    config_.validate();
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
    auto params = net.parameter_blocks();
    const auto g = grads.blocks();
    auto m = state.m_.blocks();
    auto v = state.v_.blocks();
    if (g.size() != params.size() || m.size() != params.size())
        throw DimensionError("adam_step: gradient layout does not match the network");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (g[b].size() != params[b].size()) throw DimensionError("adam_step: " + net.block_name(b) + " shape mismatch");
        for (std::size_t i = 0; i < g[b].size(); ++i)
            if (!std::isfinite(g[b][i]))
                throw NumericError("non-finite gradient at " + net.block_name(b) + "[" + std::to_string(i) + "]");
    }

    const auto& c = state.config_;
    ++state.step_;
    const double t = double(state.step_);
    const double bias1 = 1.0 - std::pow(c.beta1, t);
    const double bias2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double gi = g[b][i];
            m[b][i] = c.beta1 * m[b][i] + (1.0 - c.beta1) * gi;
            v[b][i] = c.beta2 * v[b][i] + (1.0 - c.beta2) * gi * gi;
            const double m_hat = m[b][i] / bias1;
            const double v_hat = v[b][i] / bias2;
            params[b][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

}  // namespace modegan
