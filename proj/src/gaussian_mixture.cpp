#include "modegan/gaussian_mixture.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "modegan/errors.hpp"

namespace modegan {

std::string to_string(Benchmark b) {
    switch (b) {
        case Benchmark::Ring8: return "ring8";
        case Benchmark::Grid25: return "grid25";
        case Benchmark::Random25: return "random25";
        case Benchmark::Cube27: return "cube27";
    }
    return "?";
}

Benchmark parse_benchmark(std::string_view name) {
    for (Benchmark b : kAllBenchmarks)
        if (to_string(b) == name) return b;
    throw ConfigError("unknown benchmark '" + std::string(name) + "' (expected ring8, grid25, random25 or cube27)");
}

GaussianMixture::GaussianMixture(Matrix means, std::vector<double> stds, std::vector<double> weights)
    : means_(std::move(means)), stds_(std::move(stds)), weights_(std::move(weights)) {
    const std::size_t k = means_.rows();
    if (k == 0 || means_.cols() == 0) throw ConfigError("mixture needs at least one component");
    if (stds_.size() != k || weights_.size() != k) throw ConfigError("mixture: means, stds and weights disagree in length");
    for (double s : stds_)
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("mixture: component std must be finite and >= 0");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("mixture: weights must be finite and >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("mixture: weights sum to zero");
    for (double& w : weights_) w /= total;
}

namespace {

GaussianMixture lattice(std::size_t dim, double spacing, double std) {
    const std::size_t per_axis = dim == 2 ? 5 : 3;
    std::size_t count = 1;
    for (std::size_t d = 0; d < dim; ++d) count *= per_axis;
    Matrix means(count, dim);
    const double offset = spacing * double(per_axis - 1) / 2.0;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t rem = i;
        // first axis varies slowest
        for (std::size_t d = dim; d-- > 0;) {
            means(i, d) = double(rem % per_axis) * spacing - offset;
            rem /= per_axis;
        }
    }
    return {std::move(means), std::vector<double>(count, std), std::vector<double>(count, 1.0)};
}

}  // namespace

GaussianMixture make_benchmark(Benchmark which, SeededRng& rng, const BenchmarkParams& p) {
    switch (which) {
        case Benchmark::Ring8: {
            Matrix means(8, 2);
            for (std::size_t k = 0; k < 8; ++k) {
                const double angle = 2.0 * std::numbers::pi * double(k) / 8.0;
                means(k, 0) = p.ring_radius * std::cos(angle);
                means(k, 1) = p.ring_radius * std::sin(angle);
            }
            return {std::move(means), std::vector<double>(8, p.ring_std), std::vector<double>(8, 1.0)};
        }
        case Benchmark::Grid25: return lattice(2, p.grid_spacing, p.grid_std);
        case Benchmark::Cube27: return lattice(3, p.cube_spacing, p.cube_std);
        case Benchmark::Random25: {
            constexpr std::size_t kCount = 25;
            constexpr int kMaxTries = 100000;
            Matrix means(kCount, 2);
            std::size_t placed = 0;
            for (int tries = 0; placed < kCount; ++tries) {
                if (tries > kMaxTries) throw ConfigError("random25: cannot place means with the requested separation");
                const double x = rng.uniform(-p.random_half_width, p.random_half_width);
                const double y = rng.uniform(-p.random_half_width, p.random_half_width);
                const double cand[2] = {x, y};
                bool ok = true;
                for (std::size_t j = 0; j < placed && ok; ++j)
                    ok = euclidean_distance(means.row(j), cand) >= p.random_min_separation;
                if (!ok) continue;
                means(placed, 0) = x;
                means(placed, 1) = y;
                ++placed;
            }
            std::vector<double> weights(kCount);
            for (double& w : weights) w = rng.gamma(p.random_concentration);
            return {std::move(means), std::vector<double>(kCount, p.random_std), std::move(weights)};
        }
    }
    throw ConfigError("unknown benchmark");
}

Matrix sample(const GaussianMixture& mix, std::size_t n, SeededRng& rng) {
    std::vector<double> cumulative(mix.component_count());
    std::partial_sum(mix.weights().begin(), mix.weights().end(), cumulative.begin());
    Matrix out(n, mix.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t k = std::min<std::size_t>(std::size_t(it - cumulative.begin()), cumulative.size() - 1);
        const double s = mix.stds()[k];
        const auto mean = mix.mean(k);
        auto row = out.row(i);
        for (std::size_t d = 0; d < mix.dim(); ++d) row[d] = mean[d] + s * rng.normal();
    }
    return out;
}

NearestMode nearest_mode(const GaussianMixture& mix, std::span<const double> point) {
    if (point.size() != mix.dim())
        throw DimensionError("nearest_mode: point has dimension " + std::to_string(point.size()) + ", mixture " +
                             std::to_string(mix.dim()));
    NearestMode best{0, std::numeric_limits<double>::infinity()};
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mix.component_count(); ++k) {
        const double sq = squared_distance(mix.mean(k), point);
        if (sq < best_sq) {
            best_sq = sq;
            best.index = k;
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

double min_mean_separation(const GaussianMixture& mix) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mix.component_count(); ++a)
        for (std::size_t b = a + 1; b < mix.component_count(); ++b)
            best = std::min(best, euclidean_distance(mix.mean(a), mix.mean(b)));
    return best;
}

// ---------------------------------------------------------------- CSV

void write_samples_csv(std::ostream& out, const Matrix& samples) {
    for (std::size_t d = 0; d < samples.cols(); ++d) out << (d ? "," : "") << 'x' << d;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        const auto row = samples.row(r);
        for (std::size_t d = 0; d < row.size(); ++d) out << (d ? "," : "") << row[d];
        out << '\n';
    }
}

void write_samples_csv(const std::string& path, const Matrix& samples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_samples_csv(out, samples);
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

Matrix read_samples_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    bool have_header = false;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto fields = split_commas(view);
        if (!have_header) {
            for (std::size_t d = 0; d < fields.size(); ++d)
                if (fields[d] != "x" + std::to_string(d))
                    throw ConfigError("line " + std::to_string(line_no) + ": expected header x0,x1[,x2]");
            dim = fields.size();
            have_header = true;
            continue;
        }
        if (fields.size() != dim)
            throw ConfigError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                              " fields, found " + std::to_string(fields.size()));
        for (auto f : fields) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
                throw ConfigError("line " + std::to_string(line_no) + ": malformed value '" + std::string(f) + "'");
            values.push_back(v);
        }
    }
    if (!have_header) throw ConfigError("sample file is empty (no header)");
    if (values.empty()) throw ConfigError("sample file has no sample rows");
    const std::size_t rows = values.size() / dim;
    return Matrix(rows, dim, std::move(values));
}

Matrix read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_samples_csv(in);
}

}  // namespace modegan
