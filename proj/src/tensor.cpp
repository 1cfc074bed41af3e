#include "gemmbench/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "gemmbench/errors.hpp"

namespace gemmbench {

namespace {

void require_nonzero(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    require_nonzero(rows, cols);
    data_.assign(rows * cols, 0.0f);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_nonzero(rows, cols);
    if (data_.size() != rows * cols) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " +
                         shape_string());
    }
    if (!all_finite()) {
        throw ArgumentError("matrix data contains NaN or Inf");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Xorshift64Star::Xorshift64Star(Seed seed) noexcept : state_(splitmix64(seed.value)) {
    // xorshift has a fixed point at zero.
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
}

std::uint64_t Xorshift64Star::next() noexcept {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
}

float Xorshift64Star::next_symmetric() noexcept {
    const auto bits = static_cast<std::uint32_t>(next() >> 40);  // 24 bits
    const float unit = static_cast<float>(bits) * 0x1.0p-24f;
    return 2.0f * unit - 1.0f;
}

Matrix matmul_reference(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("cannot multiply " + a.shape_string() + " by " + b.shape_string());
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Seed seed) {
    require_nonzero(rows, cols);
    Xorshift64Star rng(seed);
    std::vector<float> data(rows * cols);
    for (auto& v : data) v = rng.next_symmetric();
    return Matrix(rows, cols, std::move(data));
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    }
    return t;
}

PaddedMatrix pad_to_multiple(const Matrix& a, std::size_t quantum) {
    if (quantum == 0) throw ArgumentError("padding quantum must be >= 1");
    const auto round_up = [quantum](std::size_t n) { return (n + quantum - 1) / quantum * quantum; };
    const std::size_t rows = round_up(a.rows());
    const std::size_t cols = round_up(a.cols());
    if (rows == a.rows() && cols == a.cols()) return {a, a.rows(), a.cols()};

    Matrix padded(rows, cols);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * a.cols()), a.cols(),
                    padded.data().begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    return {std::move(padded), a.rows(), a.cols()};
}

Matrix crop(const Matrix& a, std::size_t rows, std::size_t cols) {
    if (rows > a.rows() || cols > a.cols()) {
        throw ShapeError("cannot crop " + a.shape_string() + " to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    if (rows == a.rows() && cols == a.cols()) return a;
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * a.cols()), cols,
                    out.data().begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    return out;
}

double max_relative_error(const Matrix& x, const Matrix& ref) {
    if (x.rows() != ref.rows() || x.cols() != ref.cols()) {
        throw ShapeError("cannot compare " + x.shape_string() + " with " + ref.shape_string());
    }
    double max_diff = 0.0;
    double max_ref = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = ref.data()[i];
        max_diff = std::max(max_diff, std::abs(static_cast<double>(x.data()[i]) - r));
        max_ref = std::max(max_ref, std::abs(r));
    }
    return max_ref > 0.0 ? max_diff / max_ref : max_diff;
}

}  // namespace gemmbench
