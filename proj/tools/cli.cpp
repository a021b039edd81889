#include "cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "modegan/errors.hpp"
#include "modegan/experiment.hpp"

namespace modegan::cli {
namespace {

struct Options {
    std::string config;
    std::string benchmark;
    std::vector<std::string> overrides;  // key=value
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    std::optional<std::size_t> parallel;
    std::optional<double> lambda_p;
    std::string out;
    std::string encoder;
    std::string samples;
    bool progress = false;
};

ExperimentConfig resolve(const Options& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (!o.benchmark.empty()) cfg.benchmark = parse_benchmark(o.benchmark);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.seed_base = *o.seed;
    if (o.runs) cfg.runs = *o.runs;
    if (o.parallel) cfg.parallel = *o.parallel;
    if (o.lambda_p) cfg.gan.lambda_p = *o.lambda_p;
    if (!o.out.empty()) cfg.out_dir = o.out;
    cfg.validate();
    return cfg;
}

void make_dirs(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    return f;
}

AutoEncoder load_frozen_encoder(const std::string& path, std::size_t data_dim) {
    if (!std::filesystem::exists(path)) throw IoError("encoder checkpoint not found: " + path);
    AutoEncoder ae = load_autoencoder(path);
    if (!ae.frozen()) throw UsageError("encoder checkpoint " + path + " is not frozen");
    if (ae.data_dim() != data_dim)
        throw DimensionError("encoder checkpoint expects " + std::to_string(ae.data_dim()) +
                             "-dimensional data, benchmark has " + std::to_string(data_dim));
    return ae;
}

// Runs fn(0..n-1) on at most `parallel` threads. The first failure in index
// order is rethrown after every worker has stopped.
template <class Fn>
void for_each_run(std::size_t n, std::size_t parallel, Fn fn) {
    std::vector<std::exception_ptr> failures(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(parallel, n);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(6) << v;
    return ss.str();
}

std::string steps_field(const std::optional<std::size_t>& s) { return s ? std::to_string(*s) : "NA"; }

struct BatchRun {
    std::filesystem::path dir;
    RunOutcome outcome;
};

// One run per seed of cfg, each in its own directory under `root`.
std::vector<BatchRun> run_batch(const ExperimentConfig& cfg, const std::filesystem::path& root,
                                const std::optional<AutoEncoder>& shared_encoder, bool progress, std::ostream& err) {
    std::vector<BatchRun> runs(cfg.runs);
    std::mutex log_mutex;
    for_each_run(cfg.runs, cfg.parallel, [&](std::size_t i) {
        const std::uint64_t seed = cfg.run_seed(i);
        RunDirectory dir(root / run_name(cfg, seed), cfg, seed);
        RunSink sink = dir.sink();
        if (progress) {
            auto write = sink.on_eval;
            const std::string name = run_name(cfg, seed);
            sink.on_eval = [write, name, &log_mutex, &err](const EvalPoint& p) {
                write(p);
                std::lock_guard lock(log_mutex);
                err << name << " step " << p.diagnostics.step << " modes " << p.report.modes_found << " hqs "
                    << fmt(p.report.hqs) << " jsd " << fmt(p.report.jsd) << '\n';
            };
        }
        std::optional<AutoEncoder> own;
        const AutoEncoder* encoder = shared_encoder ? &*shared_encoder : nullptr;
        if (cfg.gan.lambda_p > 0.0) {
            if (!encoder) {
                own = pretrain_encoder(cfg, prepare_data(cfg, seed).reals, seed);
                encoder = &*own;
            }
            dir.write_encoder(*encoder);
        }
        runs[i].dir = dir.path();
        runs[i].outcome = run_experiment(cfg, seed, encoder, sink);
        dir.finish(runs[i].outcome);
    });
    return runs;
}

void write_table(std::ostream& f, Benchmark b, const std::vector<BatchRun>& runs) {
    std::vector<EvalReport> reports;
    for (const auto& r : runs) {
        f << report_row(b, std::to_string(r.outcome.seed), r.outcome.final_report);
        reports.push_back(r.outcome.final_report);
    }
    if (reports.size() >= 2) f << aggregate_rows(b, aggregate_runs(reports));
}

void print_runs(std::ostream& out, const std::vector<BatchRun>& runs) {
    for (const auto& r : runs) {
        const auto& rep = r.outcome.final_report;
        out << r.dir.string() << ": modes " << rep.modes_found << " hqs " << fmt(rep.hqs) << " jsd " << fmt(rep.jsd)
            << '\n';
    }
}

// ---------------------------------------------------------------- commands

int cmd_pretrain_ae(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve(o);
    const auto dir = output_root(cfg) / (to_string(*cfg.benchmark) + "_ae_seed" + std::to_string(cfg.seed_base));
    make_dirs(dir);
    const auto data = prepare_data(cfg, cfg.seed_base);
    PretrainResult curve;
    const AutoEncoder ae = pretrain_encoder(cfg, data.reals, cfg.seed_base, &curve);
    save_autoencoder(dir / "encoder.ckpt", ae);
    save_config(dir / "config.ini", cfg);
    auto f = open_out(dir / "ae_loss.csv");
    f << "epoch,mse\n" << std::setprecision(17);
    for (std::size_t e = 0; e < curve.loss_curve.size(); ++e) f << e + 1 << ',' << curve.loss_curve[e] << '\n';
    out << (dir / "encoder.ckpt").string() << '\n';
    return kOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve(o);
    const auto root = output_root(cfg);
    make_dirs(root);
    std::optional<AutoEncoder> encoder;
    if (!o.encoder.empty() && cfg.gan.lambda_p > 0.0)
        encoder = load_frozen_encoder(o.encoder, prepare_data(cfg, cfg.run_seed(0)).mixture.dim());
    const auto runs = run_batch(cfg, root, encoder, o.progress, err);
    print_runs(out, runs);
    if (runs.size() >= 2) {
        const auto path = root / (to_string(*cfg.benchmark) + "_" + cfg.label() + "_aggregate.csv");
        auto f = open_out(path);
        f << "# jsd in nats (natural log)\n" << kReportHeader << '\n';
        write_table(f, *cfg.benchmark, runs);
        out << path.string() << '\n';
    }
    return kOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
    Options base = o;
    std::vector<Benchmark> benchmarks;
    if (o.benchmark.empty()) {
        benchmarks.assign(std::begin(kAllBenchmarks), std::end(kAllBenchmarks));
        base.benchmark = to_string(benchmarks.front());
    } else {
        std::stringstream ss(o.benchmark);
        for (std::string item; std::getline(ss, item, ',');) benchmarks.push_back(parse_benchmark(item));
        base.benchmark = to_string(benchmarks.front());
    }
    const ExperimentConfig first = resolve(base);
    const auto root = output_root(first);
    make_dirs(root);
    const auto path = root / ("sweep_" + first.label() + ".csv");
    std::ostringstream table;
    table << "# jsd in nats (natural log)\n" << kReportHeader << '\n';
    for (Benchmark b : benchmarks) {
        ExperimentConfig cfg = first;
        cfg.benchmark = b;
        const auto runs = run_batch(cfg, root, std::nullopt, o.progress, err);
        print_runs(out, runs);
        write_table(table, b, runs);
    }
    open_out(path) << table.str();
    out << path.string() << '\n';
    return kOk;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg = resolve(o);
    if (cfg.gan.lambda_p <= 0.0) throw ConfigError("ablate-weights needs gan.lambda_p > 0");
    const auto root = output_root(cfg);
    make_dirs(root);
    struct Pair {
        std::optional<std::size_t> on, off;
    };
    std::vector<Pair> pairs(cfg.runs);
    std::optional<AutoEncoder> shared;
    if (!o.encoder.empty())
        shared = load_frozen_encoder(o.encoder, prepare_data(cfg, cfg.run_seed(0)).mixture.dim());
    std::mutex log_mutex;
    for_each_run(cfg.runs, cfg.parallel, [&](std::size_t i) {
        const std::uint64_t seed = cfg.run_seed(i);
        std::optional<AutoEncoder> own;
        const AutoEncoder* encoder = shared ? &*shared : nullptr;
        if (!encoder) {
            own = pretrain_encoder(cfg, prepare_data(cfg, seed).reals, seed);
            encoder = &*own;
        }
        for (bool live : {true, false}) {
            ExperimentConfig arm = cfg;
            arm.gan.live_weights = live;
            RunDirectory dir(root / (live ? "weights_on" : "weights_off") / run_name(arm, seed), arm, seed);
            dir.write_encoder(*encoder);
            const auto outcome = run_experiment(arm, seed, encoder, dir.sink());
            dir.finish(outcome);
            (live ? pairs[i].on : pairs[i].off) = outcome.steps_to_coverage;
            if (o.progress) {
                std::lock_guard lock(log_mutex);
                err << "seed " << seed << (live ? " on " : " off ") << steps_field(outcome.steps_to_coverage)
                    << '\n';
            }
        }
    });
    const auto path = root / (to_string(*cfg.benchmark) + "_ablation.csv");
    auto f = open_out(path);
    f << "seed,steps_on,steps_off\n";
    std::vector<std::optional<std::size_t>> on, off;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        f << cfg.run_seed(i) << ',' << steps_field(pairs[i].on) << ',' << steps_field(pairs[i].off) << '\n';
        on.push_back(pairs[i].on);
        off.push_back(pairs[i].off);
    }
    out << "median steps to full coverage: weights on " << median_steps(on) << ", weights off " << median_steps(off)
        << '\n'
        << path.string() << '\n';
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve(o);
    const Matrix gens = read_samples_csv(o.samples);
    const auto data = prepare_data(cfg, cfg.seed_base);
    if (gens.cols() != data.mixture.dim())
        throw DimensionError("samples have " + std::to_string(gens.cols()) + " columns, benchmark " +
                             to_string(*cfg.benchmark) + " expects " + std::to_string(data.mixture.dim()));
    const EvalReport rep = evaluate(gens, data.mixture, data.reals, cfg.metrics);
    std::ostringstream text;
    text << "# jsd in nats (natural log)\n"
         << kReportHeader << '\n'
         << report_row(*cfg.benchmark, std::to_string(cfg.seed_base), rep);
    if (o.out.empty()) {
        out << text.str();
    } else {
        make_dirs(o.out);
        const auto path = std::filesystem::path(o.out) / "eval_report.csv";
        open_out(path) << text.str();
        out << path.string() << '\n';
    }
    return kOk;
}

int cmd_dump_bank(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve(o);
    const auto data = prepare_data(cfg, cfg.seed_base);
    const AutoEncoder encoder = o.encoder.empty() ? pretrain_encoder(cfg, data.reals, cfg.seed_base)
                                                  : load_frozen_encoder(o.encoder, data.mixture.dim());
    const ModeBank bank = build_mode_bank(cfg, data.reals, encoder, cfg.seed_base);
    if (o.out.empty()) {
        write_bank_csv(out, bank);
    } else {
        make_dirs(o.out);
        const auto path = std::filesystem::path(o.out) / "bank.csv";
        auto f = open_out(path);
        write_bank_csv(f, bank);
        out << path.string() << '\n';
    }
    return kOk;
}

void add_common(CLI::App* cmd, Options& o, bool batch) {
    cmd->add_option("--config", o.config, "config file (section.key = value)");
    cmd->add_option("--benchmark", o.benchmark, "ring8, grid25, random25 or cube27");
    cmd->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
    cmd->add_option("--seed", o.seed, "seed (first seed of a batch)");
    cmd->add_option("--out", o.out, "output directory (default $MODEGAN_OUT, then ./runs)");
    cmd->add_option("--lambda-p", o.lambda_p, "penalty coefficient override; 0 trains the plain GAN");
    if (batch) {
        cmd->add_option("--runs", o.runs, "number of seeds");
        cmd->add_option("--parallel", o.parallel, "concurrent runs (default 1)");
        cmd->add_flag("--progress", o.progress, "log every evaluation to stderr");
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mode-penalty GAN experiments on mixture-of-Gaussians benchmarks", "modegan"};
    app.require_subcommand(1);
    Options o;

    auto* pretrain = app.add_subcommand("pretrain-ae", "pretrain and freeze the autoencoder");
    add_common(pretrain, o, false);
    auto* train = app.add_subcommand("train", "train one or more seeds");
    add_common(train, o, true);
    train->add_option("--encoder", o.encoder, "frozen encoder checkpoint (default: pretrain per seed)");
    auto* sweep = app.add_subcommand("sweep", "train every benchmark (or a comma list) for all seeds");
    add_common(sweep, o, true);
    auto* ablate = app.add_subcommand("ablate-weights", "paired runs with live and constant penalty weights");
    add_common(ablate, o, true);
    ablate->add_option("--encoder", o.encoder, "frozen encoder checkpoint (default: pretrain per seed)");
    auto* eval = app.add_subcommand("eval", "evaluate a CSV of samples against a benchmark");
    add_common(eval, o, false);
    eval->add_option("--samples", o.samples, "samples CSV with header x0,x1[,x2]")->required();
    auto* dump = app.add_subcommand("dump-bank", "write the encoded mode bank and its weights");
    add_common(dump, o, false);
    dump->add_option("--encoder", o.encoder, "frozen encoder checkpoint (default: pretrain)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUserError;
    }

    try {
        if (pretrain->parsed()) return cmd_pretrain_ae(o, out);
        if (train->parsed()) return cmd_train(o, out, err);
        if (sweep->parsed()) return cmd_sweep(o, out, err);
        if (ablate->parsed()) return cmd_ablate(o, out, err);
        if (eval->parsed()) return cmd_eval(o, out);
        return cmd_dump_bank(o, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const TrainingError& e) {
        err << "aborted at step " << e.at() << ": " << e.what() << '\n';
        return kNumericAbort;
    } catch (const NumericError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumericAbort;
    }
}

}  // namespace modegan::cli
