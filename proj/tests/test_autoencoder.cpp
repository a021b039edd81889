#include <doctest.h>

#include <filesystem>

#include "modegan/autoencoder.hpp"
#include "modegan/errors.hpp"
#include "modegan/gaussian_mixture.hpp"
#include "oracles.hpp"

using namespace modegan;

namespace {

double data_variance(const Matrix& x) {
    const auto mean = column_means(x);
    double ss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t d = 0; d < x.cols(); ++d) ss += (x(i, d) - mean[d]) * (x(i, d) - mean[d]);
    return ss / double(x.size());
}

struct GridFixture {
    GaussianMixture mix;
    Matrix reals;
    AutoEncoder ae;
    PretrainResult curve;

    static GridFixture& get() {
        static GridFixture f = [] {
            SeededRng rng(0);
            auto mix = make_benchmark(Benchmark::Grid25, rng);
            auto reals = sample(mix, 4000, rng);
            AutoEncoder ae = AutoEncoder::create(AutoEncoderShape{}, rng);
            PretrainConfig cfg;
            cfg.epochs = 60;
            auto curve = pretrain(ae, reals, cfg, rng);
            ae.freeze();
            return GridFixture{std::move(mix), std::move(reals), std::move(ae), std::move(curve)};
        }();
        return f;
    }
};

}  // namespace

TEST_SUITE("pretrain") {
    TEST_CASE("a constant point is learned exactly") {
        SeededRng rng(1);
        const Matrix reals(256, 2, 0.7);
        AutoEncoderShape shape;
        shape.hidden = {16};
        AutoEncoder ae = AutoEncoder::create(shape, rng);
        PretrainConfig cfg;
        cfg.epochs = 400;
        cfg.batch_size = 64;
        const auto r = pretrain(ae, reals, cfg, rng);
        CHECK(r.loss_curve.size() == 400);
        CHECK(r.loss_curve.back() < 1e-6);
        CHECK(r.below_threshold);
    }

    TEST_CASE("grid25 reconstruction beats half the data variance") {
        auto& f = GridFixture::get();
        CHECK(reconstruction_mse(f.ae, f.reals) < 0.5 * data_variance(f.reals));
        CHECK(f.curve.loss_curve.back() == doctest::Approx(reconstruction_mse(f.ae, f.reals)).epsilon(1e-9));
    }

    TEST_CASE("smoothed loss curve does not increase") {
        const auto& c = GridFixture::get().curve.loss_curve;
        std::vector<double> windows;
        for (std::size_t s = 0; s + 10 <= c.size(); s += 10) {
            double m = 0.0;
            for (std::size_t i = s; i < s + 10; ++i) m += c[i];
            windows.push_back(m / 10.0);
        }
        for (std::size_t i = 1; i < windows.size(); ++i) CHECK(windows[i] <= windows[i - 1]);
    }

    TEST_CASE("component centroids stay distinct in the encoding") {
        auto& f = GridFixture::get();
        const Matrix enc = f.ae.encode(f.reals);
        std::vector<std::vector<double>> sum(25, std::vector<double>(2, 0.0));
        std::vector<double> n(25, 0.0);
        for (std::size_t i = 0; i < f.reals.rows(); ++i) {
            const auto k = nearest_mode(f.mix, f.reals.row(i)).index;
            n[k] += 1;
            for (std::size_t d = 0; d < 2; ++d) sum[k][d] += enc(i, d);
        }
        for (std::size_t a = 0; a < 25; ++a)
            for (std::size_t b = a + 1; b < 25; ++b) {
                const std::vector<double> ca{sum[a][0] / n[a], sum[a][1] / n[a]};
                const std::vector<double> cb{sum[b][0] / n[b], sum[b][1] / n[b]};
                CHECK(oracle::euclid(ca, cb) > 0.0);
            }
    }

    TEST_CASE("frozen autoencoder refuses training") {
        auto ae = GridFixture::get().ae;
        SeededRng rng(2);
        CHECK_THROWS_AS(pretrain(ae, GridFixture::get().reals, PretrainConfig{}, rng), UsageError);
    }

    TEST_CASE("divergence reports the epoch") {
        SeededRng rng(3);
        AutoEncoder ae = AutoEncoder::create(AutoEncoderShape{}, rng);
        Matrix reals(64, 2, 1.0);
        reals(5, 1) = std::numeric_limits<double>::infinity();
        try {
            pretrain(ae, reals, PretrainConfig{}, rng);
            FAIL("expected TrainingError");
        } catch (const TrainingError& e) {
            CHECK(e.at() == 0);
        }
    }
}

TEST_SUITE("encode") {
    TEST_CASE("empty batch and determinism") {
        const auto& ae = GridFixture::get().ae;
        const Matrix out = ae.encode(Matrix(0, 2));
        CHECK(out.rows() == 0);
        CHECK(out.cols() == 2);
        const Matrix x = GridFixture::get().reals.slice_rows(0, 20);
        CHECK(ae.encode(x) == ae.encode(x));
    }

    TEST_CASE("reconstruction stays within the pretraining error") {
        auto& f = GridFixture::get();
        const Matrix x = f.reals.slice_rows(0, 1000);
        const Matrix back = f.ae.decode(f.ae.encode(x));
        double mse = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) mse += std::pow(back.values()[i] - x.values()[i], 2);
        mse /= double(x.size());
        CHECK(mse <= 2.0 * f.curve.loss_curve.back());
    }
}

TEST_SUITE("encode_backward") {
    TEST_CASE("requires a frozen encoder and a cache") {
        SeededRng rng(4);
        AutoEncoder ae = AutoEncoder::create(AutoEncoderShape{}, rng);
        ForwardCache cache;
        const Matrix x(3, 2, 0.5);
        ae.encode(x, cache);
        CHECK_THROWS_AS(ae.encode_backward(cache, Matrix(3, 2, 1.0)), UsageError);
        ae.freeze();
        ForwardCache empty;
        CHECK_THROWS_AS(ae.encode_backward(empty, Matrix(3, 2, 1.0)), UsageError);
    }

    TEST_CASE("zero upstream gives zero gradient") {
        const auto& ae = GridFixture::get().ae;
        ForwardCache cache;
        ae.encode(GridFixture::get().reals.slice_rows(0, 8), cache);
        const Matrix g = ae.encode_backward(cache, Matrix(8, 2));
        for (double v : g.values()) CHECK(v == 0.0);
    }

    TEST_CASE("identity encoder returns upstream times W transpose") {
        DenseNet enc({3, 2}, {Activation::identity()});
        enc.weights(0) = Matrix{{1, 2}, {3, 4}, {5, 6}};
        DenseNet dec({2, 3}, {Activation::identity()});
        const AutoEncoder ae(enc, dec, true);
        ForwardCache cache;
        ae.encode(Matrix{{1, 1, 1}}, cache);
        const Matrix g = ae.encode_backward(cache, Matrix{{1, -1}});
        CHECK(g(0, 0) == -1.0);
        CHECK(g(0, 1) == -1.0);
        CHECK(g(0, 2) == -1.0);
    }

    TEST_CASE("chain through a generator matches finite differences") {
        SeededRng rng(5);
        AutoEncoderShape shape;
        shape.hidden = {6, 5};
        shape.hidden_activation = Activation::tanh();
        AutoEncoder ae = AutoEncoder::create(shape, rng);
        ae.freeze();
        DenseNet gen({2, 4, 2}, {Activation::tanh(), Activation::identity()});
        init_params(gen, InitScheme::GlorotUniform, rng);
        Matrix z(4, 2);
        for (double& v : z.values()) v = rng.normal();
        const std::vector<double> target{0.3, -0.2};

        auto loss = [&] {
            const Matrix e = ae.encode(forward(gen, z));
            double s = 0.0;
            for (std::size_t i = 0; i < e.rows(); ++i) s += oracle::euclid(e.row(i), target);
            return s;
        };
        ForwardCache gc, ec;
        const Matrix e = ae.encode(forward(gen, z, gc), ec);
        Matrix up(e.rows(), 2);
        for (std::size_t i = 0; i < e.rows(); ++i) {
            const double d = oracle::euclid(e.row(i), target);
            for (std::size_t k = 0; k < 2; ++k) up(i, k) = (e(i, k) - target[k]) / d;
        }
        const auto analytic = backward(gen, gc, ae.encode_backward(ec, up)).params;
        const auto ab = analytic.blocks();
        auto blocks = gen.parameter_blocks();
        const std::uint64_t before = ae.encoder_checksum();
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto num = oracle::numeric_gradient(blocks[b], loss);
            for (std::size_t i = 0; i < num.size(); ++i) CHECK(oracle::rel_error(ab[b][i], num[i]) < 1e-4);
        }
        CHECK(ae.encoder_checksum() == before);
    }
}

TEST_SUITE("autoencoder checkpoint") {
    TEST_CASE("round trip preserves parameters and the frozen flag") {
        const auto& ae = GridFixture::get().ae;
        const auto path = std::filesystem::temp_directory_path() / "modegan_test_ae.ckpt";
        save_autoencoder(path, ae);
        const AutoEncoder back = load_autoencoder(path);
        CHECK(back.frozen());
        CHECK(back.encoder() == ae.encoder());
        CHECK(back.decoder() == ae.decoder());
        CHECK(back.latent_dim() == 2);
        std::filesystem::remove(path);
    }
}
