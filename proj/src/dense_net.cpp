#include "modegan/dense_net.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

#include "modegan/errors.hpp"

namespace modegan {

std::string to_string(const Activation& act) {
    switch (act.kind) {
        case ActivationKind::Identity: return "identity";
        case ActivationKind::Relu: return "relu";
        case ActivationKind::LeakyRelu: {
            char buf[64];
            auto res = std::to_chars(buf, buf + sizeof buf, act.slope);
            return "leaky_relu(" + std::string(buf, res.ptr) + ")";
        }
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::Sigmoid: return "sigmoid";
    }
    return "?";
}

Activation parse_activation(std::string_view text) {
    if (text == "identity" || text == "linear") return Activation::identity();
    if (text == "relu") return Activation::relu();
    if (text == "tanh") return Activation::tanh();
    if (text == "sigmoid") return Activation::sigmoid();
    constexpr std::string_view leaky = "leaky_relu";
    if (text.starts_with(leaky)) {
        auto rest = text.substr(leaky.size());
        if (rest.empty()) return Activation::leaky_relu(0.2);
        if (rest.front() == '(' && rest.back() == ')') {
            rest = rest.substr(1, rest.size() - 2);
            double slope = 0.0;
            auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), slope);
            if (ec == std::errc() && ptr == rest.data() + rest.size() && slope >= 0.0)
                return Activation::leaky_relu(slope);
        }
    }
    throw ConfigError("unknown activation '" + std::string(text) + "'");
}

double activate(const Activation& act, double z) {
    switch (act.kind) {
        case ActivationKind::Identity: return z;
        case ActivationKind::Relu: return z > 0.0 ? z : 0.0;
        case ActivationKind::LeakyRelu: return z > 0.0 ? z : act.slope * z;
        case ActivationKind::Tanh: return std::tanh(z);
        case ActivationKind::Sigmoid:
            // split on sign so exp() never overflows
            if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
            else {
                const double e = std::exp(z);
                return e / (1.0 + e);
            }
    }
    return z;
}

// ---------------------------------------------------------------- Gradients

void Gradients::set_zero() {
    for (auto& w : weights) w.fill(0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

bool Gradients::is_zero() const {
    for (auto block : blocks())
        if (std::any_of(block.begin(), block.end(), [](double v) { return v != 0.0; })) return false;
    return true;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
    if (other.weights.size() != weights.size()) throw DimensionError("gradient layer count mismatch");
    auto dst = blocks();
    auto src = other.blocks();
    for (std::size_t b = 0; b < dst.size(); ++b) {
        if (dst[b].size() != src[b].size()) throw DimensionError("gradient block shape mismatch");
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += scale * src[b][i];
    }
}

std::vector<std::span<double>> Gradients::blocks() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.emplace_back(weights[l].values());
        out.emplace_back(biases[l]);
    }
    return out;
}

std::vector<std::span<const double>> Gradients::blocks() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.emplace_back(weights[l].values());
        out.emplace_back(biases[l]);
    }
    return out;
}

// ---------------------------------------------------------------- DenseNet

DenseNet::DenseNet(std::vector<std::size_t> layer_dims, std::vector<Activation> activations)
    : dims_(std::move(layer_dims)), activations_(std::move(activations)) {
    if (dims_.size() < 2) throw ConfigError("a network needs at least an input and an output dimension");
    if (activations_.size() != dims_.size() - 1) {
        throw ConfigError("expected " + std::to_string(dims_.size() - 1) + " activations, got " +
                          std::to_string(activations_.size()));
    }
    for (std::size_t d : dims_)
        if (d == 0) throw ConfigError("layer dimensions must be positive");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        weights_.emplace_back(dims_[l], dims_[l + 1]);
        biases_.emplace_back(dims_[l + 1], 0.0);
    }
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (auto block : parameter_blocks()) n += block.size();
    return n;
}

std::vector<std::span<double>> DenseNet::parameter_blocks() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.emplace_back(weights_[l].values());
        out.emplace_back(biases_[l]);
    }
    return out;
}

std::vector<std::span<const double>> DenseNet::parameter_blocks() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.emplace_back(weights_[l].values());
        out.emplace_back(biases_[l]);
    }
    return out;
}

std::string DenseNet::block_name(std::size_t block) const {
    return "layer " + std::to_string(block / 2) + (block % 2 == 0 ? " weights" : " biases");
}

Gradients DenseNet::zero_gradients() const {
    Gradients g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        g.weights.emplace_back(weights_[l].rows(), weights_[l].cols());
        g.biases.emplace_back(biases_[l].size(), 0.0);
    }
    return g;
}

// ---------------------------------------------------------------- passes

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache& cache) {
    if (batch.cols() != net.input_dim()) {
        throw DimensionError("forward: batch has " + std::to_string(batch.cols()) +
                             " columns, network expects " + std::to_string(net.input_dim()));
    }
    const std::size_t layers = net.layer_count();
    cache.inputs.resize(layers + 1);
    cache.preactivations.resize(layers);
    cache.inputs[0] = batch;
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = matmul(cache.inputs[l], net.weights(l));
        const auto& b = net.biases(l);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
        }
        Matrix a = z;
        const Activation act = net.activations()[l];
        if (act.kind != ActivationKind::Identity)
            for (double& v : a.values()) v = activate(act, v);
        cache.preactivations[l] = std::move(z);
        cache.inputs[l + 1] = std::move(a);
    }
    return cache.inputs.back();
}

Matrix forward(const DenseNet& net, const Matrix& batch) {
    ForwardCache scratch;
    return forward(net, batch, scratch);
}

namespace {

// upstream (d loss / d output of layer l) -> d loss / d preactivation, in place
void through_activation(const Activation& act, const Matrix& pre, const Matrix& out, Matrix& grad) {
    auto g = grad.values();
    auto z = pre.values();
    auto y = out.values();
    switch (act.kind) {
        case ActivationKind::Identity: break;
        case ActivationKind::Relu:
            for (std::size_t i = 0; i < g.size(); ++i)
                if (z[i] <= 0.0) g[i] = 0.0;
            break;
        case ActivationKind::LeakyRelu:
            for (std::size_t i = 0; i < g.size(); ++i)
                if (z[i] <= 0.0) g[i] *= act.slope;
            break;
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
            break;
        case ActivationKind::Sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
            break;
    }
}

Matrix run_backward(const DenseNet& net, const ForwardCache& cache, const Matrix& upstream,
                    Gradients* params) {
    if (!cache.ready() || cache.inputs.size() != net.layer_count() + 1)
        throw UsageError("backward called without a matching forward pass");
    require_shape(upstream, cache.output().rows(), net.output_dim(), "backward upstream gradient");

    Matrix grad = upstream;
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        through_activation(net.activations()[l], cache.preactivations[l], cache.inputs[l + 1], grad);
        if (params) {
            params->weights[l] = matmul_at(cache.inputs[l], grad);
            auto& db = params->biases[l];
            std::fill(db.begin(), db.end(), 0.0);
            for (std::size_t r = 0; r < grad.rows(); ++r) {
                const auto row = grad.row(r);
                for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
            }
        }
        grad = matmul_bt(grad, net.weights(l));
    }
    return grad;
}

}  // namespace

BackwardResult backward(const DenseNet& net, const ForwardCache& cache, const Matrix& upstream) {
    BackwardResult result;
    result.params = net.zero_gradients();
    result.input = run_backward(net, cache, upstream, &result.params);
    return result;
}

Matrix backward_input(const DenseNet& net, const ForwardCache& cache, const Matrix& upstream) {
    return run_backward(net, cache, upstream, nullptr);
}

void init_params(DenseNet& net, InitScheme scheme, SeededRng& rng) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double fan_in = double(net.layer_dims()[l]);
        const double fan_out = double(net.layer_dims()[l + 1]);
        InitScheme s = scheme;
        if (s == InitScheme::Auto) {
            const auto kind = net.activations()[l].kind;
            s = (kind == ActivationKind::Relu || kind == ActivationKind::LeakyRelu) ? InitScheme::HeUniform
                                                                                     : InitScheme::GlorotUniform;
        }
        const double limit = s == InitScheme::HeUniform ? std::sqrt(6.0 / fan_in)
                                                        : std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : net.weights(l).values()) w = rng.uniform(-limit, limit);
        auto& b = net.biases(l);
        std::fill(b.begin(), b.end(), 0.0);
    }
}

std::uint64_t checksum(const DenseNet& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t d : net.layer_dims()) {
        const std::uint64_t v = d;
        feed(&v, sizeof v);
    }
    for (const auto& a : net.activations()) {
        feed(&a.kind, sizeof a.kind);
        feed(&a.slope, sizeof a.slope);
    }
    for (auto block : net.parameter_blocks()) feed(block.data(), block.size_bytes());
    return h;
}

}  // namespace modegan
