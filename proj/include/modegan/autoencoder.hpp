#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "modegan/adam.hpp"
#include "modegan/dense_net.hpp"
#include "modegan/matrix.hpp"
#include "modegan/rng.hpp"

namespace modegan {

struct AutoEncoderShape {
    std::size_t data_dim = 2;
    std::size_t latent_dim = 2;
    std::vector<std::size_t> hidden{64, 64};  // encoder side; decoder mirrors it
    Activation hidden_activation = Activation::relu();
};

struct PretrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 256;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    /// Final reconstruction MSE above this emits a warning on stderr.
    double warn_threshold = 1e-2;
};

struct PretrainResult {
    std::vector<double> loss_curve;  // full-set reconstruction MSE after each epoch
    bool below_threshold = false;
};

/// Encoder/decoder pair. After freeze() the parameters can no longer be
/// changed through this interface; the encoder then serves as the fixed
/// map into the space where mode distances are measured.
class AutoEncoder {
public:
    AutoEncoder(DenseNet encoder, DenseNet decoder, bool frozen = false);
    /// Fresh network pair with initialised parameters.
    static AutoEncoder create(const AutoEncoderShape& shape, SeededRng& rng);

    const DenseNet& encoder() const noexcept { return encoder_; }
    const DenseNet& decoder() const noexcept { return decoder_; }
    std::size_t data_dim() const { return encoder_.input_dim(); }
    std::size_t latent_dim() const { return encoder_.output_dim(); }

    bool frozen() const noexcept { return frozen_; }
    void freeze() noexcept { frozen_ = true; }

    Matrix encode(const Matrix& batch) const;
    Matrix encode(const Matrix& batch, ForwardCache& cache) const;
    Matrix decode(const Matrix& latent) const;
    Matrix reconstruct(const Matrix& batch) const { return decode(encode(batch)); }

    /// d loss / d encoder input, given d loss / d encoding and the cache of
    /// the encode() that produced it. Requires a frozen encoder; never
    /// touches parameters.
    Matrix encode_backward(const ForwardCache& cache, const Matrix& upstream) const;

    std::uint64_t encoder_checksum() const { return checksum(encoder_); }

    friend PretrainResult pretrain(AutoEncoder& ae, const Matrix& reals, const PretrainConfig& cfg, SeededRng& rng);

private:
    DenseNet encoder_;
    DenseNet decoder_;
    bool frozen_;
};

/// Minimise mean squared reconstruction error with Adam. Throws UsageError
/// on a frozen autoencoder and TrainingError (carrying the epoch) if the
/// loss becomes non-finite.
PretrainResult pretrain(AutoEncoder& ae, const Matrix& reals, const PretrainConfig& cfg, SeededRng& rng);

/// Mean over all entries of (reconstruct(batch) - batch)^2.
double reconstruction_mse(const AutoEncoder& ae, const Matrix& batch);

/// Checkpoint container kind AutoEncoder: header fields latent_dim (u32)
/// and frozen flag (u32), then encoder and decoder records.
void save_autoencoder(const std::filesystem::path& path, const AutoEncoder& ae);
AutoEncoder load_autoencoder(const std::filesystem::path& path);

}  // namespace modegan
