#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modegan/autoencoder.hpp"
#include "modegan/gan_trainer.hpp"
#include "modegan/gaussian_mixture.hpp"
#include "modegan/metrics.hpp"

namespace modegan {

/// Everything needed to reproduce a run. Serialises to a flat
/// `section.key = value` text file; every key except experiment.benchmark
/// has a default.
struct ExperimentConfig {
    std::optional<Benchmark> benchmark;
    std::size_t runs = 1;
    std::uint64_t seed_base = 0;
    std::string out_dir;  // empty: $MODEGAN_OUT, then ./runs
    std::size_t parallel = 1;

    BenchmarkParams data;
    std::uint64_t mixture_seed = 0;  // only random25 consumes it
    std::size_t train_samples = 20000;

    AutoEncoderShape ae;
    PretrainConfig pretrain;

    GanConfig gan;
    MetricsConfig metrics;

    /// Throws ConfigError naming the first offending field.
    void validate() const;
    /// "baseline" when lambda_p = 0, otherwise "modegan".
    std::string label() const;
    /// Seed of the i-th run of a batch.
    std::uint64_t run_seed(std::size_t i) const { return seed_base + i; }
};

/// Every key understood by the config format, in file order.
std::vector<std::string> config_keys();
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& cfg, std::string_view key);

/// Full config, defaults materialised. Parsing the result gives back an
/// identical config.
std::string to_config_text(const ExperimentConfig& cfg);
/// Applies the assignments in `text` on top of `base`. '#' starts a
/// comment. Throws ConfigError with the line number for unknown keys or
/// malformed values.
ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

/// Output root: cfg.out_dir, else $MODEGAN_OUT, else "runs".
std::filesystem::path output_root(const ExperimentConfig& cfg);

struct ExperimentData {
    GaussianMixture mixture;
    Matrix reals;
};

/// Target mixture (from mixture_seed) plus the training set drawn with the run seed.
ExperimentData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// Pretrain an autoencoder on `reals` and freeze it.
AutoEncoder pretrain_encoder(const ExperimentConfig& cfg, const Matrix& reals, std::uint64_t seed,
                             PretrainResult* curve = nullptr);

/// The run's mode bank: bank_size training reals drawn with the seed's
/// bank stream, encoded by the frozen encoder.
ModeBank build_mode_bank(const ExperimentConfig& cfg, const Matrix& reals, const AutoEncoder& encoder,
                         std::uint64_t seed);

/// Artifact sink for one run. Each callback may be left empty.
struct RunSink {
    std::function<void(const EvalPoint&)> on_eval;
    std::function<void(std::size_t step, const GanModel&)> on_checkpoint;
    std::function<void(std::size_t step, const GanModel&)> on_abort;
};

struct RunOutcome {
    std::uint64_t seed = 0;
    RunResult result;
    EvalReport final_report;
    std::optional<std::size_t> steps_to_coverage;
    std::optional<ModeBank> bank;  // final state, absent for baseline runs
    std::uint64_t initial_bank_checksum = 0;
};

/// Runs one seed end to end. `encoder` may be supplied to skip pretraining
/// (it must be frozen and match the data dimension); otherwise one is
/// pretrained from the seed.
RunOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const AutoEncoder* encoder = nullptr,
                          const RunSink& sink = {});

/// FNV-1a over the bank's encodings.
std::uint64_t bank_checksum(const ModeBank& bank);

/// Median of steps-to-coverage values; a run that never got there counts as
/// +infinity, so the result may be infinite.
double median_steps(const std::vector<std::optional<std::size_t>>& steps);

// ---------------------------------------------------------------- CSV artifacts

inline constexpr std::string_view kDiagnosticsHeader = "step,d_loss,g_loss,dist,lambda_eff,modes_found,hqs,jsd";
inline constexpr std::string_view kReportHeader = "benchmark,seed,modes,hqs,jsd";
inline constexpr std::string_view kLongHeader = "step,metric,value,run";

std::string diagnostics_row(const EvalPoint& point);
std::string report_row(Benchmark benchmark, std::string_view seed, const EvalReport& report);
std::string aggregate_rows(Benchmark benchmark, const AggregateReport& agg);
/// Long-format lines (one per metric) for plotting.
std::string long_rows(const EvalPoint& point, std::string_view run);

/// Bank export: "m0,...,m{d-1},w" then one row per mode.
void write_bank_csv(std::ostream& out, const ModeBank& bank);

/// Writes the files of one run directory as the run progresses:
/// config.ini, diagnostics.csv, metrics_long.csv, report.csv, bank.csv,
/// encoder.ckpt and checkpoints/.
class RunDirectory {
public:
    RunDirectory(std::filesystem::path dir, const ExperimentConfig& cfg, std::uint64_t seed);

    const std::filesystem::path& path() const noexcept { return dir_; }
    RunSink sink();
    void write_encoder(const AutoEncoder& ae) const;
    void finish(const RunOutcome& outcome) const;

private:
    std::filesystem::path dir_;
    Benchmark benchmark_;
    std::uint64_t seed_;
    std::string run_name_;
};

/// `<benchmark>_<label>_seed<seed>`
std::string run_name(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace modegan
