#include "modegan/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "modegan/errors.hpp"

namespace modegan {
namespace {

// ---------------------------------------------------------------- value codecs

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                      std::string(expected) + ")");
}

template <class T>
T parse_number(std::string_view key, std::string_view text, std::string_view expected) {
    text = trim(text);
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) bad_value(key, text, expected);
    return v;
}

double parse_real(std::string_view key, std::string_view text) {
    const double v = parse_number<double>(key, text, "a real number");
    if (!std::isfinite(v)) bad_value(key, text, "a finite real number");
    return v;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
    return parse_number<std::size_t>(key, text, "a non-negative integer");
}

std::uint64_t parse_u64(std::string_view key, std::string_view text) {
    return parse_number<std::uint64_t>(key, text, "a non-negative integer");
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "on") return true;
    if (text == "false" || text == "0" || text == "off") return false;
    bad_value(key, text, "true or false");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
    std::vector<std::size_t> out;
    text = trim(text);
    if (text.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.push_back(parse_count(key, text.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

Activation parse_act(std::string_view key, std::string_view text) {
    try {
        return parse_activation(trim(text));
    } catch (const ConfigError&) {
        bad_value(key, text, "identity, relu, leaky_relu(s), tanh or sigmoid");
    }
}

// ---------------------------------------------------------------- key table

struct Field {
    std::string_view key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view key, std::string_view)> set;
};

#define MG_REAL(KEY, EXPR) \
    Field{KEY, [](const ExperimentConfig& c) { return fmt_double(c.EXPR); }, \
          [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.EXPR = parse_real(k, v); }}
#define MG_COUNT(KEY, EXPR) \
    Field{KEY, [](const ExperimentConfig& c) { return std::to_string(c.EXPR); }, \
          [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.EXPR = parse_count(k, v); }}
#define MG_U64(KEY, EXPR) \
    Field{KEY, [](const ExperimentConfig& c) { return std::to_string(c.EXPR); }, \
          [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.EXPR = parse_u64(k, v); }}
#define MG_BOOL(KEY, EXPR) \
    Field{KEY, [](const ExperimentConfig& c) { return std::string(c.EXPR ? "true" : "false"); }, \
          [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.EXPR = parse_bool(k, v); }}
#define MG_LIST(KEY, EXPR) \
    Field{KEY, [](const ExperimentConfig& c) { return fmt_list(c.EXPR); }, \
          [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.EXPR = parse_list(k, v); }}
#define MG_ACT(KEY, EXPR) \
    Field{KEY, [](const ExperimentConfig& c) { return to_string(c.EXPR); }, \
          [](ExperimentConfig& c, std::string_view k, std::string_view v) { c.EXPR = parse_act(k, v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"experiment.benchmark",
              [](const ExperimentConfig& c) { return c.benchmark ? to_string(*c.benchmark) : std::string(); },
              [](ExperimentConfig& c, std::string_view, std::string_view v) {
                  v = trim(v);
                  if (v.empty()) c.benchmark.reset();
                  else c.benchmark = parse_benchmark(v);
              }},
        MG_COUNT("experiment.runs", runs),
        MG_U64("experiment.seed_base", seed_base),
        Field{"experiment.out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
              [](ExperimentConfig& c, std::string_view, std::string_view v) { c.out_dir = std::string(trim(v)); }},
        MG_COUNT("experiment.parallel", parallel),

        MG_U64("data.mixture_seed", mixture_seed),
        MG_COUNT("data.train_samples", train_samples),
        MG_REAL("data.ring_radius", data.ring_radius),
        MG_REAL("data.ring_std", data.ring_std),
        MG_REAL("data.grid_spacing", data.grid_spacing),
        MG_REAL("data.grid_std", data.grid_std),
        MG_REAL("data.random_half_width", data.random_half_width),
        MG_REAL("data.random_std", data.random_std),
        MG_REAL("data.random_concentration", data.random_concentration),
        MG_REAL("data.random_min_separation", data.random_min_separation),
        MG_REAL("data.cube_spacing", data.cube_spacing),
        MG_REAL("data.cube_std", data.cube_std),

        MG_COUNT("ae.latent_dim", ae.latent_dim),
        MG_LIST("ae.hidden", ae.hidden),
        MG_ACT("ae.hidden_activation", ae.hidden_activation),
        MG_COUNT("ae.epochs", pretrain.epochs),
        MG_COUNT("ae.batch_size", pretrain.batch_size),
        MG_REAL("ae.learning_rate", pretrain.adam.learning_rate),
        MG_REAL("ae.beta1", pretrain.adam.beta1),
        MG_REAL("ae.beta2", pretrain.adam.beta2),
        MG_REAL("ae.epsilon", pretrain.adam.epsilon),
        MG_REAL("ae.warn_threshold", pretrain.warn_threshold),

        MG_COUNT("gan.noise_dim", gan.noise_dim),
        MG_REAL("gan.lambda_p", gan.lambda_p),
        MG_REAL("gan.learning_rate", gan.adam.learning_rate),
        MG_REAL("gan.beta1", gan.adam.beta1),
        MG_REAL("gan.beta2", gan.adam.beta2),
        MG_REAL("gan.epsilon", gan.adam.epsilon),
        MG_COUNT("gan.batch_size", gan.batch_size),
        MG_COUNT("gan.bank_size", gan.bank_size),
        MG_COUNT("gan.history", gan.history),
        MG_COUNT("gan.d_steps_per_g", gan.d_steps_per_g),
        MG_COUNT("gan.total_g_steps", gan.total_g_steps),
        MG_COUNT("gan.eval_every", gan.eval_every),
        MG_COUNT("gan.penalty_patience", gan.penalty_patience),
        MG_BOOL("gan.live_weights", gan.live_weights),
        MG_BOOL("gan.normalize_weights", gan.normalize_weights),
        MG_BOOL("gan.random_biases", gan.random_biases),
        MG_BOOL("gan.standardize_data", gan.standardize_data),
        MG_REAL("gan.generator_average", gan.generator_average),
        MG_LIST("gan.generator_hidden", gan.generator_hidden),
        MG_LIST("gan.discriminator_hidden", gan.discriminator_hidden),
        MG_ACT("gan.hidden_activation", gan.hidden_activation),
        MG_COUNT("gan.eval_samples", gan.eval_samples),
        MG_COUNT("gan.checkpoint_every", gan.checkpoint_every),

        MG_REAL("metrics.sigma_mult", metrics.sigma_mult),
        MG_COUNT("metrics.hit_min", metrics.hit_min),
        MG_COUNT("metrics.bins", metrics.bins),
        MG_REAL("metrics.smoothing", metrics.smoothing),
    };
    return table;
}

#undef MG_REAL
#undef MG_COUNT
#undef MG_U64
#undef MG_BOOL
#undef MG_LIST
#undef MG_ACT

const Field& field(std::string_view key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (!benchmark) throw ConfigError("missing required field: experiment.benchmark");
    if (runs == 0) throw ConfigError("experiment.runs must be >= 1");
    if (parallel == 0) throw ConfigError("experiment.parallel must be >= 1");
    if (train_samples == 0) throw ConfigError("data.train_samples must be >= 1");
    if (ae.latent_dim == 0) throw ConfigError("ae.latent_dim must be >= 1");
    if (pretrain.batch_size == 0) throw ConfigError("ae.batch_size must be >= 1");
    for (std::size_t h : ae.hidden)
        if (h == 0) throw ConfigError("ae.hidden widths must be >= 1");
    pretrain.adam.validate();
    gan.validate();
    if (gan.lambda_p > 0.0 && gan.bank_size > train_samples)
        throw ConfigError("gan.bank_size exceeds data.train_samples");
    if (!(metrics.sigma_mult > 0.0)) throw ConfigError("metrics.sigma_mult must be > 0");
    if (!(metrics.smoothing >= 0.0)) throw ConfigError("metrics.smoothing must be >= 0");
}

std::string ExperimentConfig::label() const { return gan.lambda_p == 0.0 ? "baseline" : "modegan"; }

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    field(key).set(cfg, key, value);
}

std::string get_config_value(const ExperimentConfig& cfg, std::string_view key) { return field(key).get(cfg); }

std::string to_config_text(const ExperimentConfig& cfg) {
    std::string out = "# modegan experiment configuration (all defaults materialised)\n";
    std::string_view section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const auto sec = f.key.substr(0, dot);
        if (sec != section) {
            out += "\n";
            section = sec;
        }
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            set_config_value(base, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_config_text(cfg);
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("MODEGAN_OUT"); env && *env) return env;
    return "runs";
}

// ---------------------------------------------------------------- runs

ExperimentData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (!cfg.benchmark) throw ConfigError("missing required field: experiment.benchmark");
    SeededRng mix_rng = SeededRng(cfg.mixture_seed).derive(streams::kBenchmark);
    GaussianMixture mix = make_benchmark(*cfg.benchmark, mix_rng, cfg.data);
    SeededRng data_rng = SeededRng(seed).derive(streams::kTrainData);
    Matrix reals = sample(mix, cfg.train_samples, data_rng);
    return {std::move(mix), std::move(reals)};
}

AutoEncoder pretrain_encoder(const ExperimentConfig& cfg, const Matrix& reals, std::uint64_t seed,
                             PretrainResult* curve) {
    SeededRng rng = SeededRng(seed).derive(streams::kAutoencoder);
    AutoEncoderShape shape = cfg.ae;
    shape.data_dim = reals.cols();
    AutoEncoder ae = AutoEncoder::create(shape, rng);
    PretrainResult result = pretrain(ae, reals, cfg.pretrain, rng);
    ae.freeze();
    if (curve) *curve = std::move(result);
    return ae;
}

std::uint64_t bank_checksum(const ModeBank& bank) {
    return fnv1a(bank.modes().data(), bank.modes().size() * sizeof(double));
}

ModeBank build_mode_bank(const ExperimentConfig& cfg, const Matrix& reals, const AutoEncoder& encoder,
                         std::uint64_t seed) {
    SeededRng rng = SeededRng(seed).derive(streams::kModeBank);
    return extract_mode_bank(reals, cfg.gan.bank_size, encoder, rng, cfg.gan.history, cfg.gan.normalize_weights);
}

double median_steps(const std::vector<std::optional<std::size_t>>& steps) {
    if (steps.empty()) throw ConfigError("median_steps: no runs");
    std::vector<double> v;
    for (const auto& s : steps) v.push_back(s ? double(*s) : std::numeric_limits<double>::infinity());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const AutoEncoder* encoder,
                          const RunSink& sink) {
    cfg.validate();
    ExperimentData data = prepare_data(cfg, seed);
    GanConfig gan = cfg.gan;
    gan.seed = seed;

    RunOutcome outcome;
    outcome.seed = seed;
    std::optional<AutoEncoder> owned;
    const bool use_penalty = gan.lambda_p > 0.0;
    if (use_penalty) {
        if (!encoder) {
            owned = pretrain_encoder(cfg, data.reals, seed);
            encoder = &*owned;
        }
        if (!encoder->frozen()) throw UsageError("run_experiment: encoder must be frozen");
        if (encoder->data_dim() != data.mixture.dim())
            throw DimensionError("encoder expects " + std::to_string(encoder->data_dim()) +
                                 "-dimensional data, benchmark " + to_string(*cfg.benchmark) + " has " +
                                 std::to_string(data.mixture.dim()));
        outcome.bank.emplace(build_mode_bank(cfg, data.reals, *encoder, seed));
        outcome.initial_bank_checksum = bank_checksum(*outcome.bank);
    }

    SeededRng init_rng = SeededRng(seed).derive(streams::kInit);
    GanModel model = GanModel::create(gan, data.mixture.dim(), init_rng);
    if (gan.standardize_data) model.scaling = DataScaling::fit(data.reals);

    TrainInputs inputs;
    inputs.mixture = &data.mixture;
    inputs.reals = &data.reals;
    inputs.encoder = use_penalty ? encoder : nullptr;
    inputs.bank = outcome.bank ? &*outcome.bank : nullptr;
    inputs.metrics = cfg.metrics;
    TrainHooks hooks{sink.on_eval, sink.on_checkpoint, sink.on_abort};

    outcome.result = train(model, gan, inputs, hooks);
    if (outcome.result.final_report) outcome.final_report = *outcome.result.final_report;
    outcome.steps_to_coverage = steps_to_full_coverage(outcome.result, data.mixture.component_count());
    return outcome;
}

// ---------------------------------------------------------------- CSV

namespace {

std::string num(double v) {
    std::ostringstream ss;
    ss << std::setprecision(10) << v;
    return ss.str();
}

}  // namespace

std::string diagnostics_row(const EvalPoint& p) {
    const auto& d = p.diagnostics;
    return std::to_string(d.step) + "," + num(d.d_loss) + "," + num(d.g_loss) + "," + num(d.dist) + "," +
           num(d.lambda_eff) + "," + std::to_string(p.report.modes_found) + "," + num(p.report.hqs) + "," +
           num(p.report.jsd) + "\n";
}

std::string report_row(Benchmark benchmark, std::string_view seed, const EvalReport& r) {
    return to_string(benchmark) + "," + std::string(seed) + "," + std::to_string(r.modes_found) + "," + num(r.hqs) +
           "," + num(r.jsd) + "\n";
}

std::string aggregate_rows(Benchmark benchmark, const AggregateReport& agg) {
    const std::string b = to_string(benchmark);
    return b + ",mean," + num(agg.modes.mean) + "," + num(agg.hqs.mean) + "," + num(agg.jsd.mean) + "\n" + b +
           ",std," + num(agg.modes.std) + "," + num(agg.hqs.std) + "," + num(agg.jsd.std) + "\n";
}

std::string long_rows(const EvalPoint& p, std::string_view run) {
    const std::string step = std::to_string(p.diagnostics.step);
    const std::string tail = "," + std::string(run) + "\n";
    return step + ",d_loss," + num(p.diagnostics.d_loss) + tail + step + ",g_loss," + num(p.diagnostics.g_loss) +
           tail + step + ",dist," + num(p.diagnostics.dist) + tail + step + ",lambda_eff," +
           num(p.diagnostics.lambda_eff) + tail + step + ",modes_found," + std::to_string(p.report.modes_found) +
           tail + step + ",hqs," + num(p.report.hqs) + tail + step + ",jsd," + num(p.report.jsd) + tail;
}

void write_bank_csv(std::ostream& out, const ModeBank& bank) {
    for (std::size_t d = 0; d < bank.latent_dim(); ++d) out << 'm' << d << ',';
    out << "w\n" << std::setprecision(17);
    for (std::size_t m = 0; m < bank.size(); ++m) {
        for (double v : bank.modes().row(m)) out << v << ',';
        out << bank.weights()[m] << '\n';
    }
}

std::string run_name(const ExperimentConfig& cfg, std::uint64_t seed) {
    return to_string(*cfg.benchmark) + "_" + cfg.label() + "_seed" + std::to_string(seed);
}

RunDirectory::RunDirectory(std::filesystem::path dir, const ExperimentConfig& cfg, std::uint64_t seed)
    : dir_(std::move(dir)), benchmark_(*cfg.benchmark), seed_(seed), run_name_(run_name(cfg, seed)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_ / "checkpoints", ec);
    if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
    ExperimentConfig resolved = cfg;
    resolved.seed_base = seed;
    resolved.runs = 1;
    save_config(dir_ / "config.ini", resolved);
    std::ofstream diag(dir_ / "diagnostics.csv");
    std::ofstream longf(dir_ / "metrics_long.csv");
    if (!diag || !longf) throw IoError("cannot write into " + dir_.string());
    diag << kDiagnosticsHeader << '\n';
    longf << kLongHeader << '\n';
}

RunSink RunDirectory::sink() {
    RunSink s;
    const auto dir = dir_;
    const auto name = run_name_;
    s.on_eval = [dir, name](const EvalPoint& p) {
        std::ofstream diag(dir / "diagnostics.csv", std::ios::app);
        std::ofstream longf(dir / "metrics_long.csv", std::ios::app);
        diag << diagnostics_row(p) << std::flush;
        longf << long_rows(p, name) << std::flush;
        if (!diag || !longf) throw IoError("cannot append to diagnostics in " + dir.string());
    };
    s.on_checkpoint = [dir](std::size_t step, const GanModel& m) {
        save_gan((dir / "checkpoints" / ("gan_step" + std::to_string(step) + ".ckpt")).string(), m);
    };
    s.on_abort = [dir](std::size_t step, const GanModel& m) {
        save_gan((dir / "checkpoints" / ("abort_step" + std::to_string(step) + ".ckpt")).string(), m);
    };
    return s;
}

void RunDirectory::write_encoder(const AutoEncoder& ae) const { save_autoencoder(dir_ / "encoder.ckpt", ae); }

void RunDirectory::finish(const RunOutcome& outcome) const {
    std::ofstream report(dir_ / "report.csv");
    if (!report) throw IoError("cannot write report in " + dir_.string());
    report << "# jsd in nats (natural log)\n" << kReportHeader << '\n';
    if (outcome.result.final_report) report << report_row(benchmark_, std::to_string(seed_), outcome.final_report);
    if (outcome.bank) {
        std::ofstream bank(dir_ / "bank.csv");
        write_bank_csv(bank, *outcome.bank);
    }
}

}  // namespace modegan
