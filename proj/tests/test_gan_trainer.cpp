#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <utility>

#include "modegan/errors.hpp"
#include "modegan/gan_trainer.hpp"
#include "oracles.hpp"

using namespace modegan;

namespace {

GanConfig small_config() {
    GanConfig cfg;
    cfg.generator_hidden = {12, 12};
    cfg.discriminator_hidden = {12};
    cfg.batch_size = 32;
    cfg.bank_size = 24;
    cfg.total_g_steps = 40;
    cfg.eval_every = 10;
    cfg.eval_samples = 200;
    cfg.adam.learning_rate = 1e-3;
    return cfg;
}

AutoEncoder identity_encoder(std::size_t dim) {
    DenseNet enc({dim, dim}, {Activation::identity()});
    for (std::size_t i = 0; i < dim; ++i) enc.weights(0)(i, i) = 1.0;
    return AutoEncoder(enc, enc, true);
}

struct Setup {
    GaussianMixture mix;
    Matrix reals;
    AutoEncoder encoder;
    ModeBank bank;

    explicit Setup(const GanConfig& cfg, Benchmark b = Benchmark::Ring8)
        : mix([&] {
              SeededRng r(0);
              return make_benchmark(b, r);
          }()),
          reals([&] {
              SeededRng r(1);
              return sample(mix, 2000, r);
          }()),
          encoder(identity_encoder(mix.dim())),
          bank([&] {
              SeededRng r(2);
              return extract_mode_bank(reals, cfg.bank_size, encoder, r, cfg.history);
          }()) {}

    TrainInputs inputs() { return TrainInputs{&mix, &reals, &encoder, &bank, {}}; }
};

GanModel make_model(const GanConfig& cfg, std::size_t dim = 2, std::uint64_t seed = 3) {
    SeededRng rng(seed);
    return GanModel::create(cfg, dim, rng);
}

void make_d_constant_half(GanModel& m) {
    const std::size_t last = m.discriminator.layer_count() - 1;
    for (double& w : m.discriminator.weights(last).values()) w = 0.0;
    for (double& b : m.discriminator.biases(last)) b = 0.0;
}

Matrix noise(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    SeededRng rng(seed);
    return draw_noise(rows, dim, rng);
}

}  // namespace

TEST_SUITE("gan losses") {
    TEST_CASE("a discriminator stuck at one half") {
        const GanConfig cfg = small_config();
        GanModel m = make_model(cfg);
        make_d_constant_half(m);
        const Matrix reals(16, 2, 1.0);
        const DLoss d = d_loss(m, reals, noise(16, 2, 4));
        CHECK(d.loss == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
        CHECK(std::abs(d.loss - 1.3863) <= 1e-4);
        const GLoss g = g_loss(m, noise(16, 2, 5), 0.0);
        CHECK(g.adversarial == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
        CHECK(std::abs(g.loss - 0.6931) <= 1e-4);
        CHECK(g.distance == 0.0);
        CHECK(g.assignment.pairs.empty());
    }

    TEST_CASE("discriminator gradient matches finite differences") {
        GanConfig cfg = small_config();
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            GanModel m = make_model(cfg, 2, seed);
            if (seed % 2) m.scaling = DataScaling{{0.5, -1.0}, {2.0, 0.7}};
            SeededRng rng(seed + 10);
            Matrix reals(6, 2);
            for (double& v : reals.values()) v = rng.normal(0.0, 2.0);
            const Matrix z = draw_noise(6, cfg.noise_dim, rng);
            const DLoss d = d_loss(m, reals, z);
            const auto analytic = d.grads.blocks();
            auto blocks = m.discriminator.parameter_blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const auto num = oracle::numeric_gradient(blocks[b], [&] { return d_loss(m, reals, z).loss; });
                for (std::size_t i = 0; i < num.size(); ++i) CHECK(oracle::rel_error(analytic[b][i], num[i]) < 1e-4);
            }
        }
    }

    TEST_CASE("generator gradient with the penalty matches finite differences") {
        GanConfig cfg = small_config();
        cfg.bank_size = 5;
        Setup s(cfg);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            GanModel m = make_model(cfg, 2, seed);
            if (seed % 2) m.scaling = DataScaling{{0.5, -1.0}, {2.0, 0.7}};
            SeededRng rng(seed + 20);
            PenaltyBatch pb{&s.encoder, &s.bank, draw_noise(5, cfg.noise_dim, rng)};
            const Matrix z = draw_noise(6, cfg.noise_dim, rng);
            const GLoss g = g_loss(m, z, 3.0, pb);
            CHECK(g.distance > 0.0);
            CHECK(g.loss == doctest::Approx(g.adversarial + 3.0 * g.distance).epsilon(1e-14));
            const auto analytic = g.grads.blocks();
            auto blocks = m.generator.parameter_blocks();
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const auto num = oracle::numeric_gradient(blocks[b], [&] { return g_loss(m, z, 3.0, pb).loss; });
                for (std::size_t i = 0; i < num.size(); ++i) CHECK(oracle::rel_error(analytic[b][i], num[i]) < 1e-4);
            }
        }
    }

    TEST_CASE("penalty preconditions") {
        GanConfig cfg = small_config();
        GanModel m = make_model(cfg);
        CHECK_THROWS_AS(g_loss(m, noise(4, 2, 1), 1.0), UsageError);
        Setup s(cfg);
        AutoEncoder thawed(s.encoder.encoder(), s.encoder.decoder(), false);
        CHECK_THROWS_AS(g_loss(m, noise(4, 2, 1), 1.0, PenaltyBatch{&thawed, &s.bank, noise(4, 2, 2)}), UsageError);
        CHECK_THROWS_AS(g_loss(m, noise(4, 2, 1), -1.0), ConfigError);
        CHECK_THROWS_AS(d_loss(m, Matrix(0, 2), noise(4, 2, 1)), ConfigError);
    }
}

TEST_SUITE("model setup") {
    TEST_CASE("biases are drawn within the fan-in bound unless disabled") {
        GanConfig cfg = small_config();
        const GanModel m = make_model(cfg);
        for (const DenseNet* net : {&m.generator, &m.discriminator}) {
            bool nonzero = false;
            for (std::size_t l = 0; l < net->layer_count(); ++l) {
                const double bound = 1.0 / std::sqrt(double(net->layer_dims()[l]));
                for (double b : net->biases(l)) {
                    CHECK(std::abs(b) <= bound);
                    nonzero = nonzero || b != 0.0;
                }
            }
            CHECK(nonzero);
        }
        cfg.random_biases = false;
        const GanModel z = make_model(cfg);
        for (std::size_t l = 0; l < z.generator.layer_count(); ++l)
            for (double b : z.generator.biases(l)) CHECK(b == 0.0);
    }

    TEST_CASE("data scaling standardizes and inverts") {
        SeededRng rng(9);
        Matrix x(400, 2);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            x(i, 0) = rng.normal(3.0, 2.0);
            x(i, 1) = rng.normal(-1.0, 0.5);
        }
        const DataScaling s = DataScaling::fit(x);
        const Matrix n = s.to_net(x);
        for (std::size_t j = 0; j < 2; ++j) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < n.rows(); ++i) mean += n(i, j);
            mean /= double(n.rows());
            for (std::size_t i = 0; i < n.rows(); ++i) sq += (n(i, j) - mean) * (n(i, j) - mean);
            CHECK(std::abs(mean) < 1e-12);
            CHECK(sq / double(n.rows()) == doctest::Approx(1.0).epsilon(1e-12));
        }
        const Matrix back = s.to_data(n);
        for (std::size_t i = 0; i < x.values().size(); ++i)
            CHECK(back.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-12));
        const DataScaling flat = DataScaling::fit(Matrix(3, 1, 2.0));
        CHECK(flat.scale[0] == 1.0);
        CHECK(DataScaling{}.to_net(x).values()[0] == x.values()[0]);
        CHECK_THROWS_AS(s.to_net(Matrix(2, 3)), DimensionError);
    }

    TEST_CASE("generate maps back to data space") {
        GanModel m = make_model(small_config());
        const Matrix z = noise(8, 2, 1);
        const Matrix raw = m.generate(z);
        m.scaling = DataScaling{{1.0, -2.0}, {3.0, 0.5}};
        const Matrix scaled = m.generate(z);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            CHECK(scaled(i, 0) == doctest::Approx(raw(i, 0) * 3.0 + 1.0));
            CHECK(scaled(i, 1) == doctest::Approx(raw(i, 1) * 0.5 - 2.0));
        }
    }
}

TEST_SUITE("generator average") {
    TEST_CASE("tracks an exponential moving average of the live weights") {
        GanConfig cfg = small_config();
        cfg.lambda_p = 0.0;
        cfg.generator_average = 0.9;
        cfg.total_g_steps = 3;
        Setup s(cfg);
        GanModel m = make_model(cfg);
        std::vector<std::vector<double>> expect;
        for (auto b : std::as_const(m.generator).parameter_blocks()) expect.emplace_back(b.begin(), b.end());
        GanModel probe = m;
        SeededRng rng(SeededRng(cfg.seed).derive(streams::kTraining));
        for (std::size_t step = 1; step <= 3; ++step) {
            train_step(probe, cfg, s.reals, nullptr, nullptr, 0.0, rng, step);
            const auto live = std::as_const(probe.generator).parameter_blocks();
            for (std::size_t b = 0; b < expect.size(); ++b)
                for (std::size_t i = 0; i < expect[b].size(); ++i) expect[b][i] = 0.9 * expect[b][i] + 0.1 * live[b][i];
        }
        train(m, cfg, TrainInputs{&s.mix, &s.reals, nullptr, nullptr, {}});
        REQUIRE(m.average.has_value());
        const auto avg = std::as_const(*m.average).parameter_blocks();
        for (std::size_t b = 0; b < expect.size(); ++b)
            for (std::size_t i = 0; i < expect[b].size(); ++i)
                CHECK(avg[b][i] == doctest::Approx(expect[b][i]).epsilon(1e-12));
        const Matrix z = noise(5, 2, 3);
        CHECK(m.generate(z) == m.scaling.to_data(forward(*m.average, z)));
    }

    TEST_CASE("zero decay evaluates the live generator") {
        GanConfig cfg = small_config();
        cfg.lambda_p = 0.0;
        cfg.generator_average = 0.0;
        Setup s(cfg);
        GanModel m = make_model(cfg);
        train(m, cfg, TrainInputs{&s.mix, &s.reals, nullptr, nullptr, {}});
        CHECK_FALSE(m.average.has_value());
        cfg.generator_average = 1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_SUITE("train step") {
    TEST_CASE("weights move only after penalised steps") {
        GanConfig cfg = small_config();
        Setup s(cfg);
        GanModel m = make_model(cfg);
        SeededRng rng(7);
        const auto before = s.bank.weights();
        for (std::size_t step = 1; step <= 5; ++step) {
            const auto d = train_step(m, cfg, s.reals, &s.encoder, &s.bank, 0.0, rng, step);
            CHECK_FALSE(d.penalty_active);
            CHECK(d.dist == 0.0);
        }
        CHECK(s.bank.weights() == before);
        const auto d = train_step(m, cfg, s.reals, &s.encoder, &s.bank, 3.0, rng, 6);
        CHECK(d.penalty_active);
        CHECK(d.dist > 0.0);
        CHECK_FALSE(s.bank.weights() == before);
    }

    TEST_CASE("frozen weights stay at one") {
        GanConfig cfg = small_config();
        cfg.live_weights = false;
        Setup s(cfg);
        GanModel m = make_model(cfg);
        SeededRng rng(8);
        for (std::size_t step = 1; step <= 5; ++step) train_step(m, cfg, s.reals, &s.encoder, &s.bank, 3.0, rng, step);
        for (double w : s.bank.weights()) CHECK(w == 1.0);
    }

    TEST_CASE("lambda zero follows a plain GAN loop exactly") {
        GanConfig cfg = small_config();
        cfg.lambda_p = 0.0;
        cfg.d_steps_per_g = 2;
        cfg.seed = 11;
        Setup s(cfg);
        GanModel trained = make_model(cfg);
        GanModel manual = trained;
        train(trained, cfg, TrainInputs{&s.mix, &s.reals, nullptr, nullptr, {}});

        SeededRng rng = SeededRng(cfg.seed).derive(streams::kTraining);
        for (std::size_t step = 0; step < cfg.total_g_steps; ++step) {
            for (std::size_t k = 0; k < cfg.d_steps_per_g; ++k) {
                std::vector<std::size_t> idx(cfg.batch_size);
                for (auto& i : idx) i = rng.index(s.reals.rows());
                const Matrix batch = s.reals.gather_rows(idx);
                const Matrix z = draw_noise(cfg.batch_size, cfg.noise_dim, rng);
                adam_step(manual.discriminator, d_loss(manual, batch, z).grads, manual.discriminator_opt);
            }
            const Matrix z = draw_noise(cfg.batch_size, cfg.noise_dim, rng);
            adam_step(manual.generator, g_loss(manual, z, 0.0).grads, manual.generator_opt);
        }
        CHECK(manual.generator == trained.generator);
        CHECK(manual.discriminator == trained.discriminator);
    }

    TEST_CASE("divergence raises a training error with the step") {
        GanConfig cfg = small_config();
        cfg.lambda_p = 0.0;
        Setup s(cfg);
        s.reals(0, 0) = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 1; i < s.reals.rows(); ++i) s.reals(i, 0) = s.reals(0, 0);
        GanModel m = make_model(cfg);
        std::size_t aborted = 0;
        TrainHooks hooks;
        hooks.on_abort = [&](std::size_t step, const GanModel&) { aborted = step; };
        try {
            train(m, cfg, TrainInputs{&s.mix, &s.reals, nullptr, nullptr, {}}, hooks);
            FAIL("expected TrainingError");
        } catch (const TrainingError& e) {
            CHECK(e.at() == 1);
            CHECK(aborted == 1);
        }
    }
}

TEST_SUITE("train") {
    TEST_CASE("zero steps") {
        GanConfig cfg = small_config();
        cfg.total_g_steps = 0;
        Setup s(cfg);
        GanModel m = make_model(cfg);
        std::vector<std::size_t> checkpoints;
        TrainHooks hooks;
        hooks.on_checkpoint = [&](std::size_t step, const GanModel&) { checkpoints.push_back(step); };
        const RunResult r = train(m, cfg, s.inputs(), hooks);
        CHECK(r.evals.empty());
        CHECK(r.steps.empty());
        CHECK_FALSE(r.final_report.has_value());
        CHECK(checkpoints == std::vector<std::size_t>{0});
    }

    TEST_CASE("time series, checkpoints and the frozen encoder") {
        GanConfig cfg = small_config();
        cfg.checkpoint_every = 20;
        Setup s(cfg);
        GanModel m = make_model(cfg);
        std::vector<std::size_t> checkpoints;
        TrainHooks hooks;
        hooks.on_checkpoint = [&](std::size_t step, const GanModel&) { checkpoints.push_back(step); };
        const RunResult r = train(m, cfg, s.inputs(), hooks);
        CHECK(r.steps.size() == 40);
        REQUIRE(r.evals.size() == 4);
        CHECK(r.evals[0].diagnostics.step == 10);
        CHECK(r.evals[0].report.n_samples == 200);
        CHECK(checkpoints == std::vector<std::size_t>{0, 20, 40});
        CHECK(r.encoder_checksum_before == r.encoder_checksum_after);
        CHECK(r.encoder_checksum_before == s.encoder.encoder_checksum());
        REQUIRE(r.final_report.has_value());
        CHECK(r.final_report->jsd == r.evals.back().report.jsd);
    }

    TEST_CASE("same config and seed give the same series") {
        GanConfig cfg = small_config();
        cfg.seed = 5;
        Setup a(cfg), b(cfg);
        GanModel ma = make_model(cfg), mb = make_model(cfg);
        const RunResult ra = train(ma, cfg, a.inputs());
        const RunResult rb = train(mb, cfg, b.inputs());
        REQUIRE(ra.evals.size() == rb.evals.size());
        for (std::size_t i = 0; i < ra.evals.size(); ++i) {
            CHECK(ra.evals[i].report.modes_found == rb.evals[i].report.modes_found);
            CHECK(ra.evals[i].report.hqs == rb.evals[i].report.hqs);
            CHECK(ra.evals[i].report.jsd == rb.evals[i].report.jsd);
            CHECK(ra.evals[i].diagnostics.g_loss == rb.evals[i].diagnostics.g_loss);
        }
        CHECK(ma.generator == mb.generator);
    }

    TEST_CASE("penalty switches off after patience full evaluations and stays off") {
        GanConfig cfg = small_config();
        cfg.penalty_patience = 2;
        // one wide component: every sample is high quality, so coverage is full from the start
        GaussianMixture wide(Matrix{{0, 0}}, {100.0}, {1.0});
        SeededRng r(1);
        Matrix reals = sample(wide, 500, r);
        AutoEncoder enc = identity_encoder(2);
        SeededRng br(2);
        ModeBank bank = extract_mode_bank(reals, cfg.bank_size, enc, br, cfg.history);
        GanModel m = make_model(cfg);
        const RunResult res = train(m, cfg, TrainInputs{&wide, &reals, &enc, &bank, {}});
        REQUIRE(res.penalty_off_step.has_value());
        CHECK(*res.penalty_off_step == 20);
        for (const auto& d : res.steps) CHECK(d.penalty_active == (d.step <= 20));
        CHECK(steps_to_full_coverage(res, 1) == std::optional<std::size_t>{10});
    }

    TEST_CASE("preconditions") {
        GanConfig cfg = small_config();
        Setup s(cfg);
        GanModel m = make_model(cfg);
        CHECK_THROWS_AS(train(m, cfg, TrainInputs{&s.mix, &s.reals, nullptr, nullptr, {}}), UsageError);
        GanModel m3 = make_model(cfg, 3);
        CHECK_THROWS_AS(train(m3, cfg, s.inputs()), DimensionError);
        cfg.batch_size = 0;
        CHECK_THROWS_AS(train(m, cfg, s.inputs()), ConfigError);
    }
}

TEST_SUITE("gan checkpoint") {
    TEST_CASE("round trip") {
        const GanConfig cfg = small_config();
        GanModel m = make_model(cfg);
        m.scaling = DataScaling{{0.25, -3.0}, {1.5, 2.5}};
        m.average = make_model(cfg, 2, 11).generator;
        const auto path = std::filesystem::temp_directory_path() / "modegan_test_gan.ckpt";
        save_gan(path.string(), m);
        const GanModel back = load_gan(path.string(), cfg.adam);
        CHECK(back.generator == m.generator);
        CHECK(back.discriminator == m.discriminator);
        CHECK(back.scaling == m.scaling);
        REQUIRE(back.average.has_value());
        CHECK(*back.average == *m.average);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(load_gan(path.string(), cfg.adam), IoError);
    }
}
