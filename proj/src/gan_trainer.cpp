#include "modegan/gan_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include "modegan/checkpoint.hpp"
#include "modegan/errors.hpp"

namespace modegan {
namespace {

// Denominators are floored here only to keep 1/x finite; the loss value
// itself uses kLogClamp.
constexpr double kTiny = 1e-300;

double clamped_log(double p) { return std::log(std::clamp(p, kLogClamp, 1.0)); }

std::vector<Activation> hidden_then(std::size_t hidden_layers, Activation hidden, Activation last) {
    std::vector<Activation> acts(hidden_layers, hidden);
    acts.push_back(last);
    return acts;
}

void draw_biases(DenseNet& net, SeededRng& rng) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double bound = 1.0 / std::sqrt(double(net.layer_dims()[l]));
        for (double& b : net.biases(l)) b = rng.uniform(-bound, bound);
    }
}

}  // namespace

DataScaling DataScaling::fit(const Matrix& reals) {
    if (reals.rows() < 2) throw ConfigError("DataScaling::fit: need at least two samples");
    DataScaling s;
    s.shift.assign(reals.cols(), 0.0);
    s.scale.assign(reals.cols(), 0.0);
    const double n = double(reals.rows());
    for (std::size_t j = 0; j < reals.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < reals.rows(); ++i) sum += reals(i, j);
        const double mean = sum / n;
        double sq = 0.0;
        for (std::size_t i = 0; i < reals.rows(); ++i) sq += (reals(i, j) - mean) * (reals(i, j) - mean);
        const double sd = std::sqrt(sq / n);
        s.shift[j] = mean;
        s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix DataScaling::to_net(const Matrix& x) const {
    if (identity()) return x;
    if (x.cols() != shift.size()) throw DimensionError("DataScaling: column count mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - shift[j]) / scale[j];
    return out;
}

Matrix DataScaling::to_data(const Matrix& x) const {
    if (identity()) return x;
    if (x.cols() != shift.size()) throw DimensionError("DataScaling: column count mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) * scale[j] + shift[j];
    return out;
}

Matrix GanModel::generate(const Matrix& noise) const {
    return scaling.to_data(forward(average ? *average : generator, noise));
}

namespace {

void update_average(GanModel& model, double decay) {
    if (!model.average) {
        model.average = model.generator;
        return;
    }
    auto avg = model.average->parameter_blocks();
    const auto live = std::as_const(model.generator).parameter_blocks();
    for (std::size_t b = 0; b < avg.size(); ++b)
        for (std::size_t i = 0; i < avg[b].size(); ++i) avg[b][i] = decay * avg[b][i] + (1.0 - decay) * live[b][i];
}

}  // namespace

void GanConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string("gan.") + name + " must be >= 1");
    };
    positive(noise_dim, "noise_dim");
    positive(batch_size, "batch_size");
    positive(bank_size, "bank_size");
    positive(history, "history");
    positive(d_steps_per_g, "d_steps_per_g");
    positive(eval_every, "eval_every");
    positive(penalty_patience, "penalty_patience");
    positive(eval_samples, "eval_samples");
    if (!(lambda_p >= 0.0) || !std::isfinite(lambda_p)) throw ConfigError("gan.lambda_p must be finite and >= 0");
    if (!(generator_average >= 0.0 && generator_average < 1.0))
        throw ConfigError("gan.generator_average must be in [0, 1)");
    for (std::size_t h : generator_hidden) positive(h, "generator_hidden");
    for (std::size_t h : discriminator_hidden) positive(h, "discriminator_hidden");
    adam.validate();
}

GanModel GanModel::create(const GanConfig& cfg, std::size_t data_dim, SeededRng& rng) {
    cfg.validate();
    std::vector<std::size_t> g_dims{cfg.noise_dim};
    g_dims.insert(g_dims.end(), cfg.generator_hidden.begin(), cfg.generator_hidden.end());
    g_dims.push_back(data_dim);
    std::vector<std::size_t> d_dims{data_dim};
    d_dims.insert(d_dims.end(), cfg.discriminator_hidden.begin(), cfg.discriminator_hidden.end());
    d_dims.push_back(1);

    DenseNet g(g_dims, hidden_then(cfg.generator_hidden.size(), cfg.hidden_activation, Activation::identity()));
    DenseNet d(d_dims, hidden_then(cfg.discriminator_hidden.size(), cfg.hidden_activation, Activation::sigmoid()));
    init_params(g, InitScheme::Auto, rng);
    init_params(d, InitScheme::Auto, rng);
    if (cfg.random_biases) {
        draw_biases(g, rng);
        draw_biases(d, rng);
    }
    AdamState g_opt(g, cfg.adam);
    AdamState d_opt(d, cfg.adam);
    return GanModel{std::move(g), std::move(d), std::move(g_opt), std::move(d_opt), {}, std::nullopt};
}

DLoss d_loss(const GanModel& model, const Matrix& reals, const Matrix& noise) {
    if (reals.rows() == 0 || noise.rows() == 0) throw ConfigError("d_loss: empty batch");
    const Matrix fakes = forward(model.generator, noise);
    ForwardCache real_cache, fake_cache;
    const Matrix d_real = forward(model.discriminator, model.scaling.to_net(reals), real_cache);
    const Matrix d_fake = forward(model.discriminator, fakes, fake_cache);

    const double n_real = double(reals.rows());
    const double n_fake = double(fakes.rows());
    double log_real = 0.0, log_fake = 0.0;
    Matrix up_real(d_real.rows(), 1), up_fake(d_fake.rows(), 1);
    for (std::size_t i = 0; i < d_real.rows(); ++i) {
        const double p = d_real(i, 0);
        log_real += clamped_log(p);
        up_real(i, 0) = -1.0 / (n_real * std::max(p, kTiny));
    }
    for (std::size_t i = 0; i < d_fake.rows(); ++i) {
        const double q = 1.0 - d_fake(i, 0);
        log_fake += clamped_log(q);
        up_fake(i, 0) = 1.0 / (n_fake * std::max(q, kTiny));
    }

    DLoss out;
    out.loss = -(log_real / n_real + log_fake / n_fake);
    out.grads = backward(model.discriminator, real_cache, up_real).params;
    out.grads.add_scaled(backward(model.discriminator, fake_cache, up_fake).params);
    return out;
}

GLoss g_loss(const GanModel& model, const Matrix& noise, double lambda_eff, const PenaltyBatch& penalty) {
    if (noise.rows() == 0) throw ConfigError("g_loss: empty noise batch");
    if (!(lambda_eff >= 0.0)) throw ConfigError("g_loss: lambda_eff must be >= 0");
    GLoss out;

    ForwardCache g_cache, d_cache;
    const Matrix fakes = forward(model.generator, noise, g_cache);
    const Matrix d_fake = forward(model.discriminator, fakes, d_cache);
    const double n = double(noise.rows());
    Matrix up(d_fake.rows(), 1);
    double log_sum = 0.0;
    for (std::size_t i = 0; i < d_fake.rows(); ++i) {
        const double p = d_fake(i, 0);
        log_sum += clamped_log(p);
        up(i, 0) = -1.0 / (n * std::max(p, kTiny));
    }
    out.adversarial = -log_sum / n;
    const Matrix d_input = backward_input(model.discriminator, d_cache, up);
    out.grads = backward(model.generator, g_cache, d_input).params;

    if (lambda_eff > 0.0) {
        if (!penalty.encoder || !penalty.bank) throw UsageError("g_loss: penalty term needs an encoder and a mode bank");
        if (!penalty.encoder->frozen()) throw UsageError("g_loss: the encoder must be frozen during GAN training");
        ForwardCache p_cache, e_cache;
        const Matrix gen = model.scaling.to_data(forward(model.generator, penalty.noise, p_cache));
        const Matrix enc = penalty.encoder->encode(gen, e_cache);
        out.assignment = greedy_match(*penalty.bank, enc);
        out.distance = mode_distance(*penalty.bank, out.assignment);
        const Matrix d_enc = mode_distance_backward(*penalty.bank, out.assignment, enc);
        Matrix d_gen = penalty.encoder->encode_backward(e_cache, d_enc);
        if (!model.scaling.identity())
            for (std::size_t i = 0; i < d_gen.rows(); ++i)
                for (std::size_t j = 0; j < d_gen.cols(); ++j) d_gen(i, j) *= model.scaling.scale[j];
        out.grads.add_scaled(backward(model.generator, p_cache, d_gen).params, lambda_eff);
    }
    out.loss = out.adversarial + lambda_eff * out.distance;
    return out;
}

Matrix draw_noise(std::size_t rows, std::size_t noise_dim, SeededRng& rng) {
    Matrix z(rows, noise_dim);
    for (double& v : z.values()) v = rng.normal();
    return z;
}

double discriminator_update(GanModel& model, const GanConfig& cfg, const Matrix& reals, SeededRng& rng) {
    std::vector<std::size_t> idx(cfg.batch_size);
    for (auto& i : idx) i = rng.index(reals.rows());
    const Matrix batch = reals.gather_rows(idx);
    const Matrix noise = draw_noise(cfg.batch_size, cfg.noise_dim, rng);
    DLoss d = d_loss(model, batch, noise);
    adam_step(model.discriminator, d.grads, model.discriminator_opt);
    return d.loss;
}

GeneratorUpdate generator_update(GanModel& model, const GanConfig& cfg, const AutoEncoder* encoder,
                                 const ModeBank* bank, double lambda_eff, SeededRng& rng) {
    const Matrix noise = draw_noise(cfg.batch_size, cfg.noise_dim, rng);
    PenaltyBatch penalty;
    if (lambda_eff > 0.0) {
        penalty.encoder = encoder;
        penalty.bank = bank;
        penalty.noise = draw_noise(cfg.bank_size, cfg.noise_dim, rng);
    }
    GeneratorUpdate out{g_loss(model, noise, lambda_eff, penalty), lambda_eff > 0.0};
    adam_step(model.generator, out.loss.grads, model.generator_opt);
    return out;
}

StepDiagnostics train_step(GanModel& model, const GanConfig& cfg, const Matrix& reals, const AutoEncoder* encoder,
                           ModeBank* bank, double lambda_eff, SeededRng& rng, std::size_t step) {
    StepDiagnostics diag;
    diag.step = step;
    diag.lambda_eff = lambda_eff;
    try {
        for (std::size_t i = 0; i < cfg.d_steps_per_g; ++i) diag.d_loss = discriminator_update(model, cfg, reals, rng);
        GeneratorUpdate g = generator_update(model, cfg, encoder, bank, lambda_eff, rng);
        diag.g_loss = g.loss.loss;
        diag.dist = g.loss.distance;
        diag.penalty_active = g.penalized;
        if (!std::isfinite(diag.d_loss) || !std::isfinite(diag.g_loss) || !std::isfinite(diag.dist))
            throw NumericError("non-finite loss");
        if (g.penalized && cfg.live_weights) update_penalty_weights(*bank, g.loss.assignment);
        if (cfg.generator_average > 0.0) update_average(model, cfg.generator_average);
    } catch (const NumericError& e) {
        throw TrainingError("training diverged at step " + std::to_string(step) + ": " + e.what(), step);
    }
    return diag;
}

EvalReport evaluate_generator(const GanModel& model, const GanConfig& cfg, const TrainInputs& in, SeededRng& rng) {
    const Matrix gens = model.generate(draw_noise(cfg.eval_samples, cfg.noise_dim, rng));
    return evaluate(gens, *in.mixture, *in.reals, in.metrics);
}

RunResult train(GanModel& model, const GanConfig& cfg, const TrainInputs& in, const TrainHooks& hooks) {
    cfg.validate();
    if (!in.mixture || !in.reals) throw UsageError("train: mixture and real samples are required");
    if (in.reals->cols() != in.mixture->dim() || model.generator.output_dim() != in.mixture->dim())
        throw DimensionError("train: data, mixture and generator dimensions disagree");
    const bool use_penalty = cfg.lambda_p > 0.0;
    if (use_penalty) {
        if (!in.encoder || !in.bank) throw UsageError("train: lambda_p > 0 needs an encoder and a mode bank");
        if (!in.encoder->frozen()) throw UsageError("train: the encoder must be frozen before GAN training");
        if (in.encoder->data_dim() != in.mixture->dim())
            throw DimensionError("train: encoder input dim " + std::to_string(in.encoder->data_dim()) +
                                 " does not match data dim " + std::to_string(in.mixture->dim()));
    }

    SeededRng root(cfg.seed);
    SeededRng train_rng = root.derive(streams::kTraining);
    SeededRng eval_rng = root.derive(streams::kEval);
    PenaltySwitch penalty_switch(cfg.penalty_patience);
    const std::size_t max_modes = in.mixture->component_count();

    RunResult result;
    if (in.encoder) result.encoder_checksum_before = in.encoder->encoder_checksum();
    result.steps.reserve(cfg.total_g_steps);
    if (cfg.generator_average > 0.0 && !model.average) model.average = model.generator;
    if (hooks.on_checkpoint) hooks.on_checkpoint(0, model);

    for (std::size_t step = 1; step <= cfg.total_g_steps; ++step) {
        const double lambda_eff = use_penalty && penalty_switch.active() ? cfg.lambda_p : 0.0;
        StepDiagnostics diag;
        try {
            diag = train_step(model, cfg, *in.reals, in.encoder, in.bank, lambda_eff, train_rng, step);
        } catch (const TrainingError&) {
            if (hooks.on_abort) hooks.on_abort(step, model);
            throw;
        }
        result.steps.push_back(diag);

        if (step % cfg.eval_every == 0) {
            EvalPoint point{diag, evaluate_generator(model, cfg, in, eval_rng)};
            if (use_penalty && penalty_switch.active() && !penalty_switch.observe(point.report, max_modes))
                result.penalty_off_step = step;
            result.evals.push_back(point);
            if (hooks.on_eval) hooks.on_eval(point);
        }
        if (hooks.on_checkpoint && cfg.checkpoint_every && step % cfg.checkpoint_every == 0 &&
            step != cfg.total_g_steps)
            hooks.on_checkpoint(step, model);
    }

    if (cfg.total_g_steps > 0) {
        if (!result.evals.empty() && result.evals.back().diagnostics.step == cfg.total_g_steps)
            result.final_report = result.evals.back().report;
        else
            result.final_report = evaluate_generator(model, cfg, in, eval_rng);
        if (hooks.on_checkpoint) hooks.on_checkpoint(cfg.total_g_steps, model);
    }
    if (in.encoder) result.encoder_checksum_after = in.encoder->encoder_checksum();
    return result;
}

std::optional<std::size_t> steps_to_full_coverage(const RunResult& run, std::size_t max_modes) {
    for (const auto& e : run.evals)
        if (e.report.modes_found >= max_modes) return e.diagnostics.step;
    return std::nullopt;
}

void save_gan(const std::string& path, const GanModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    checkpoint::write_header(out, checkpoint::Kind::Gan);
    checkpoint::write_net(out, model.generator, checkpoint::Role::Generator);
    checkpoint::write_net(out, model.discriminator, checkpoint::Role::Discriminator);
    checkpoint::write_u32(out, static_cast<std::uint32_t>(model.scaling.shift.size()));
    for (double v : model.scaling.shift) checkpoint::write_f64(out, v);
    for (double v : model.scaling.scale) checkpoint::write_f64(out, v);
    checkpoint::write_u32(out, model.average ? 1u : 0u);
    if (model.average) checkpoint::write_net(out, *model.average, checkpoint::Role::Generator);
    if (!out) throw IoError("write failed: " + path);
}

GanModel load_gan(const std::string& path, const AdamConfig& adam) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    if (checkpoint::read_header(in) != checkpoint::Kind::Gan) throw IoError(path + " is not a GAN checkpoint");
    DenseNet g = checkpoint::read_net(in, checkpoint::Role::Generator);
    DenseNet d = checkpoint::read_net(in, checkpoint::Role::Discriminator);
    DataScaling scaling;
    const std::uint32_t axes = checkpoint::read_u32(in);
    if (axes != 0 && axes != g.output_dim()) throw IoError(path + ": scaling does not match the generator");
    scaling.shift.resize(axes);
    scaling.scale.resize(axes);
    for (double& v : scaling.shift) v = checkpoint::read_f64(in);
    for (double& v : scaling.scale) v = checkpoint::read_f64(in);
    std::optional<DenseNet> average;
    if (checkpoint::read_u32(in) != 0) {
        average = checkpoint::read_net(in, checkpoint::Role::Generator);
        if (average->layer_dims() != g.layer_dims()) throw IoError(path + ": averaged generator shape differs");
    }
    AdamState g_opt(g, adam);
    AdamState d_opt(d, adam);
    return GanModel{std::move(g), std::move(d), std::move(g_opt), std::move(d_opt), std::move(scaling),
                    std::move(average)};
}

}  // namespace modegan
