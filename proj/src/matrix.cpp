#include "modegan/matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "modegan/errors.hpp"

namespace modegan {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

ConstView view(const Matrix& m) { return {m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }
View view(Matrix& m) { return {m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }

std::string shape_str(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(rows_, cols_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw DimensionError("row slice out of range");
    Matrix out(count, cols_);
    std::copy_n(data_.begin() + std::ptrdiff_t(first * cols_), count * cols_, out.data_.begin());
    return out;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw DimensionError("row index out of range");
        std::copy_n(data_.begin() + std::ptrdiff_t(indices[i] * cols_), cols_,
                    out.data_.begin() + std::ptrdiff_t(i * cols_));
    }
    return out;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(what + ": expected " + shape_str(rows, cols) + ", got " +
                             shape_str(m.rows(), m.cols()));
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + shape_str(a.rows(), a.cols()) + " * " +
                             shape_str(b.rows(), b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    if (!out.empty() && a.cols() > 0) view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_bt: " + shape_str(a.rows(), a.cols()) + " * T" +
                             shape_str(b.rows(), b.cols()));
    }
    Matrix out(a.rows(), b.rows());
    if (!out.empty() && a.cols() > 0) view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_at: T" + shape_str(a.rows(), a.cols()) + " * " +
                             shape_str(b.rows(), b.cols()));
    }
    Matrix out(a.cols(), b.cols());
    if (!out.empty() && a.rows() > 0) view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

std::vector<double> column_means(const Matrix& m) {
    std::vector<double> mean(m.cols(), 0.0);
    if (m.rows() == 0) return mean;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += row[c];
    }
    for (double& v : mean) v /= double(m.rows());
    return mean;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("distance between vectors of different length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

}  // namespace modegan
