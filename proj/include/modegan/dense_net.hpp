#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modegan/matrix.hpp"
#include "modegan/rng.hpp"

namespace modegan {

enum class ActivationKind : std::uint8_t { Identity = 0, Relu = 1, LeakyRelu = 2, Tanh = 3, Sigmoid = 4 };

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double slope = 0.0;  // only meaningful for LeakyRelu

    static Activation identity() { return {ActivationKind::Identity, 0.0}; }
    static Activation relu() { return {ActivationKind::Relu, 0.0}; }
    static Activation leaky_relu(double slope) { return {ActivationKind::LeakyRelu, slope}; }
    static Activation tanh() { return {ActivationKind::Tanh, 0.0}; }
    static Activation sigmoid() { return {ActivationKind::Sigmoid, 0.0}; }

    friend bool operator==(const Activation&, const Activation&) = default;
};

/// "relu", "leaky_relu(0.2)", "tanh", "sigmoid", "identity".
std::string to_string(const Activation& act);
Activation parse_activation(std::string_view text);

/// Parameter gradients, shape-congruent with the owning network.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    void set_zero();
    bool is_zero() const;
    /// this += scale * other
    void add_scaled(const Gradients& other, double scale = 1.0);
    /// Flat views over every parameter array, in (weights, bias) per-layer order.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
};

/// Per-call forward state needed by backward. Owned by the caller so that
/// several forward passes through one network can be in flight at once.
struct ForwardCache {
    std::vector<Matrix> inputs;          // inputs[l] feeds layer l; inputs[L] is the output
    std::vector<Matrix> preactivations;  // preactivations[l] = inputs[l] * W_l + b_l

    bool ready() const noexcept { return !inputs.empty(); }
    const Matrix& output() const { return inputs.back(); }
    void clear() { inputs.clear(); preactivations.clear(); }
};

struct BackwardResult {
    Gradients params;  // empty when only the input gradient was requested
    Matrix input;      // d loss / d batch
};

enum class InitScheme { Auto, GlorotUniform, HeUniform };

/// Fully connected feed-forward network. Layer l maps layer_dims[l] to
/// layer_dims[l+1] with weights stored input-major (in x out), so a batch
/// with one sample per row propagates as X * W + b.
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(std::vector<std::size_t> layer_dims, std::vector<Activation> activations);

    std::size_t layer_count() const noexcept { return activations_.size(); }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    const std::vector<Activation>& activations() const noexcept { return activations_; }

    Matrix& weights(std::size_t layer) { return weights_.at(layer); }
    const Matrix& weights(std::size_t layer) const { return weights_.at(layer); }
    std::vector<double>& biases(std::size_t layer) { return biases_.at(layer); }
    const std::vector<double>& biases(std::size_t layer) const { return biases_.at(layer); }

    std::size_t parameter_count() const;
    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::span<const double>> parameter_blocks() const;
    /// "layer 2 weights" style label of a block index from parameter_blocks().
    std::string block_name(std::size_t block) const;

    Gradients zero_gradients() const;

    friend bool operator==(const DenseNet&, const DenseNet&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<Activation> activations_;
    std::vector<Matrix> weights_;
    std::vector<std::vector<double>> biases_;
};

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache& cache);
/// Forward pass without keeping intermediate state.
Matrix forward(const DenseNet& net, const Matrix& batch);

/// Parameter and input gradients for the loss whose gradient w.r.t. the
/// network output is `upstream`.
BackwardResult backward(const DenseNet& net, const ForwardCache& cache, const Matrix& upstream);
/// Input gradient only; parameter gradients are not computed.
Matrix backward_input(const DenseNet& net, const ForwardCache& cache, const Matrix& upstream);

/// Weights per scheme, biases zero. Auto picks He for relu-family layers and
/// Glorot otherwise.
void init_params(DenseNet& net, InitScheme scheme, SeededRng& rng);

/// Apply an activation element-wise (exposed for tests and metrics).
double activate(const Activation& act, double z);

/// FNV-1a over layer dims, activations and the raw parameter bytes.
std::uint64_t checksum(const DenseNet& net);

}  // namespace modegan
