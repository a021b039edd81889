#include "modegan/autoencoder.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "modegan/checkpoint.hpp"
#include "modegan/errors.hpp"

namespace modegan {

AutoEncoder::AutoEncoder(DenseNet encoder, DenseNet decoder, bool frozen)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), frozen_(frozen) {
    if (encoder_.output_dim() != decoder_.input_dim())
        throw DimensionError("autoencoder: encoder output dim " + std::to_string(encoder_.output_dim()) +
                             " != decoder input dim " + std::to_string(decoder_.input_dim()));
    if (decoder_.output_dim() != encoder_.input_dim())
        throw DimensionError("autoencoder: decoder does not reconstruct the encoder input dimension");
}

AutoEncoder AutoEncoder::create(const AutoEncoderShape& shape, SeededRng& rng) {
    if (shape.data_dim == 0 || shape.latent_dim == 0) throw ConfigError("autoencoder dimensions must be positive");
    std::vector<std::size_t> enc_dims{shape.data_dim};
    enc_dims.insert(enc_dims.end(), shape.hidden.begin(), shape.hidden.end());
    enc_dims.push_back(shape.latent_dim);
    std::vector<std::size_t> dec_dims(enc_dims.rbegin(), enc_dims.rend());

    std::vector<Activation> acts(shape.hidden.size(), shape.hidden_activation);
    acts.push_back(Activation::identity());

    DenseNet encoder(enc_dims, acts);
    DenseNet decoder(dec_dims, acts);
    init_params(encoder, InitScheme::Auto, rng);
    init_params(decoder, InitScheme::Auto, rng);
    return AutoEncoder(std::move(encoder), std::move(decoder));
}

Matrix AutoEncoder::encode(const Matrix& batch) const { return forward(encoder_, batch); }

Matrix AutoEncoder::encode(const Matrix& batch, ForwardCache& cache) const { return forward(encoder_, batch, cache); }

Matrix AutoEncoder::decode(const Matrix& latent) const { return forward(decoder_, latent); }

Matrix AutoEncoder::encode_backward(const ForwardCache& cache, const Matrix& upstream) const {
    if (!frozen_) throw UsageError("encode_backward requires a frozen encoder");
    return backward_input(encoder_, cache, upstream);
}

double reconstruction_mse(const AutoEncoder& ae, const Matrix& batch) {
    if (batch.empty()) return 0.0;
    const Matrix rec = ae.reconstruct(batch);
    double s = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double d = rec.values()[i] - batch.values()[i];
        s += d * d;
    }
    return s / double(batch.size());
}

PretrainResult pretrain(AutoEncoder& ae, const Matrix& reals, const PretrainConfig& cfg, SeededRng& rng) {
    if (ae.frozen_) throw UsageError("cannot pretrain a frozen autoencoder");
    if (reals.rows() == 0) throw ConfigError("pretrain: no training samples");
    if (cfg.batch_size == 0) throw ConfigError("pretrain: batch_size must be >= 1");
    require_shape(reals, reals.rows(), ae.data_dim(), "pretrain reals");

    AdamState enc_opt(ae.encoder_, cfg.adam);
    AdamState dec_opt(ae.decoder_, cfg.adam);
    ForwardCache enc_cache, dec_cache;
    PretrainResult result;

    const std::size_t n = reals.rows();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = rng.sample_without_replacement(n, n);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            const Matrix batch = reals.gather_rows(std::span(order).subspan(start, count));
            const Matrix latent = forward(ae.encoder_, batch, enc_cache);
            const Matrix rec = forward(ae.decoder_, latent, dec_cache);

            Matrix grad(rec.rows(), rec.cols());
            const double scale = 2.0 / double(rec.size());
            for (std::size_t i = 0; i < rec.size(); ++i)
                grad.values()[i] = scale * (rec.values()[i] - batch.values()[i]);

            BackwardResult dec = backward(ae.decoder_, dec_cache, grad);
            BackwardResult enc = backward(ae.encoder_, enc_cache, dec.input);
            try {
                adam_step(ae.decoder_, dec.params, dec_opt);
                adam_step(ae.encoder_, enc.params, enc_opt);
            } catch (const NumericError& e) {
                throw TrainingError("autoencoder pretraining diverged at epoch " + std::to_string(epoch) + ": " +
                                        e.what(),
                                    epoch);
            }
        }
        const double loss = reconstruction_mse(ae, reals);
        if (!std::isfinite(loss))
            throw TrainingError("autoencoder pretraining diverged at epoch " + std::to_string(epoch), epoch);
        result.loss_curve.push_back(loss);
    }
    const double final_loss = result.loss_curve.empty() ? reconstruction_mse(ae, reals) : result.loss_curve.back();
    result.below_threshold = final_loss <= cfg.warn_threshold;
    if (!result.below_threshold)
        std::cerr << "warning: autoencoder reconstruction MSE " << final_loss << " above threshold "
                  << cfg.warn_threshold << "\n";
    return result;
}

void save_autoencoder(const std::filesystem::path& path, const AutoEncoder& ae) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    checkpoint::write_header(out, checkpoint::Kind::AutoEncoder);
    checkpoint::write_u32(out, static_cast<std::uint32_t>(ae.latent_dim()));
    checkpoint::write_u32(out, ae.frozen() ? 1u : 0u);
    checkpoint::write_net(out, ae.encoder(), checkpoint::Role::Encoder);
    checkpoint::write_net(out, ae.decoder(), checkpoint::Role::Decoder);
    if (!out) throw IoError("write failed: " + path.string());
}

AutoEncoder load_autoencoder(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (checkpoint::read_header(in) != checkpoint::Kind::AutoEncoder)
        throw IoError(path.string() + " is not an autoencoder checkpoint");
    const auto latent = checkpoint::read_u32(in);
    const auto frozen = checkpoint::read_u32(in);
    DenseNet enc = checkpoint::read_net(in, checkpoint::Role::Encoder);
    DenseNet dec = checkpoint::read_net(in, checkpoint::Role::Decoder);
    if (enc.output_dim() != latent) throw IoError(path.string() + ": latent_dim header disagrees with encoder");
    return AutoEncoder(std::move(enc), std::move(dec), frozen != 0);
}

}  // namespace modegan
