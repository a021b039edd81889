#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "modegan/adam.hpp"
#include "modegan/autoencoder.hpp"
#include "modegan/dense_net.hpp"
#include "modegan/gaussian_mixture.hpp"
#include "modegan/metrics.hpp"
#include "modegan/mode_penalty.hpp"
#include "modegan/rng.hpp"

namespace modegan {

/// Numerical floor applied to discriminator outputs before taking logs.
inline constexpr double kLogClamp = 1e-7;

struct GanConfig {
    std::size_t noise_dim = 2;
    double lambda_p = 3.0;  // 0 gives the plain non-saturating GAN
    AdamConfig adam{1e-4, 0.5, 0.999, 1e-8};
    std::size_t batch_size = 256;
    std::size_t bank_size = 500;  // also the number of generated samples matched per step
    std::size_t history = 5;      // k
    std::size_t d_steps_per_g = 1;
    std::size_t total_g_steps = 30000;
    std::size_t eval_every = 500;
    std::uint64_t seed = 0;
    std::size_t penalty_patience = 3;
    bool live_weights = true;  // false keeps every penalty weight at 1
    bool normalize_weights = false;
    bool random_biases = true;     // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) instead of zero
    bool standardize_data = true;  // networks see per-axis standardized data
    double generator_average = 0.999;  // EMA decay of the evaluated generator copy; 0 evaluates G itself
    std::vector<std::size_t> generator_hidden{128, 128, 128};
    std::vector<std::size_t> discriminator_hidden{128, 128};
    Activation hidden_activation = Activation::relu();
    std::size_t eval_samples = 5000;
    std::size_t checkpoint_every = 0;  // 0: initial and final checkpoints only

    void validate() const;
};

/// Fixed per-axis map from data space to network space, net = (x - shift) / scale.
/// Empty vectors mean identity.
struct DataScaling {
    std::vector<double> shift;
    std::vector<double> scale;

    /// Per-axis mean and standard deviation of `reals`.
    static DataScaling fit(const Matrix& reals);
    bool identity() const noexcept { return shift.empty(); }
    Matrix to_net(const Matrix& x) const;
    Matrix to_data(const Matrix& x) const;
    bool operator==(const DataScaling&) const = default;
};

struct GanModel {
    DenseNet generator;
    DenseNet discriminator;
    AdamState generator_opt;
    AdamState discriminator_opt;
    DataScaling scaling;
    std::optional<DenseNet> average;  // EMA of the generator weights, used only for sampling

    /// Samples from the averaged generator if there is one, mapped back to data space.
    Matrix generate(const Matrix& noise) const;

    /// Generator noise_dim -> hidden -> data_dim (identity output),
    /// discriminator data_dim -> hidden -> 1 (sigmoid output).
    static GanModel create(const GanConfig& cfg, std::size_t data_dim, SeededRng& rng);
};

struct DLoss {
    double loss = 0.0;
    Gradients grads;  // discriminator parameters
};

/// -[mean log D(x) + mean log(1 - D(G(z)))]; only D receives gradients.
DLoss d_loss(const GanModel& model, const Matrix& reals, const Matrix& noise);

/// What the mode-distance term needs besides the adversarial noise.
struct PenaltyBatch {
    const AutoEncoder* encoder = nullptr;  // must be frozen
    const ModeBank* bank = nullptr;
    Matrix noise;  // bank_size rows, matched against the bank
};

struct GLoss {
    double loss = 0.0;         // adversarial + lambda_eff * distance
    double adversarial = 0.0;  // -mean log D(G(z))
    double distance = 0.0;     // mode distance, 0 when the term is skipped
    Gradients grads;           // generator parameters, total
    MatchAssignment assignment;
};

/// Generator loss. The distance term is evaluated only when lambda_eff > 0;
/// its gradient flows through the frozen encoder into the generator.
GLoss g_loss(const GanModel& model, const Matrix& noise, double lambda_eff, const PenaltyBatch& penalty = {});

struct StepDiagnostics {
    std::size_t step = 0;  // 1-based generator step
    double d_loss = 0.0;
    double g_loss = 0.0;
    double dist = 0.0;
    double lambda_eff = 0.0;
    bool penalty_active = false;
};

/// Standard normal noise, rows x noise_dim.
Matrix draw_noise(std::size_t rows, std::size_t noise_dim, SeededRng& rng);

/// One D update on a random real minibatch. Returns the loss.
double discriminator_update(GanModel& model, const GanConfig& cfg, const Matrix& reals, SeededRng& rng);

struct GeneratorUpdate {
    GLoss loss;
    bool penalized = false;
};

/// One G update; with lambda_eff > 0 also draws the penalty batch.
GeneratorUpdate generator_update(GanModel& model, const GanConfig& cfg, const AutoEncoder* encoder,
                                 const ModeBank* bank, double lambda_eff, SeededRng& rng);

/// d_steps_per_g discriminator updates then one generator update; penalty
/// weights are refreshed after the generator step when the penalty ran.
/// Throws TrainingError(step) on a non-finite loss or gradient.
StepDiagnostics train_step(GanModel& model, const GanConfig& cfg, const Matrix& reals, const AutoEncoder* encoder,
                           ModeBank* bank, double lambda_eff, SeededRng& rng, std::size_t step);

struct EvalPoint {
    StepDiagnostics diagnostics;
    EvalReport report;
};

struct RunResult {
    std::vector<StepDiagnostics> steps;
    std::vector<EvalPoint> evals;
    std::optional<EvalReport> final_report;
    std::optional<std::size_t> penalty_off_step;
    std::uint64_t encoder_checksum_before = 0;
    std::uint64_t encoder_checksum_after = 0;
};

struct TrainInputs {
    const GaussianMixture* mixture = nullptr;
    const Matrix* reals = nullptr;            // training set, also the JSD reference
    const AutoEncoder* encoder = nullptr;     // required when lambda_p > 0
    ModeBank* bank = nullptr;                 // required when lambda_p > 0
    MetricsConfig metrics;
};

struct TrainHooks {
    std::function<void(const EvalPoint&)> on_eval;
    std::function<void(std::size_t step, const GanModel&)> on_checkpoint;
    /// Called with the failing step before a TrainingError propagates.
    std::function<void(std::size_t step, const GanModel&)> on_abort;
};

/// Evaluate `eval_samples` fresh generator samples.
EvalReport evaluate_generator(const GanModel& model, const GanConfig& cfg, const TrainInputs& in, SeededRng& rng);

/// Full run: total_g_steps train steps, evaluation every eval_every steps
/// feeding the penalty switch. Randomness comes from sub-streams of cfg.seed.
RunResult train(GanModel& model, const GanConfig& cfg, const TrainInputs& in, const TrainHooks& hooks = {});

/// First evaluated step at which every mode was found.
std::optional<std::size_t> steps_to_full_coverage(const RunResult& run, std::size_t max_modes);

/// Checkpoint container kind Gan: generator record then discriminator record.
void save_gan(const std::string& path, const GanModel& model);
/// Optimiser state is not stored; the returned model has fresh Adam moments.
GanModel load_gan(const std::string& path, const AdamConfig& adam);

}  // namespace modegan
