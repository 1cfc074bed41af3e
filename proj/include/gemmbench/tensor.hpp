#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gemmbench {

/// Dense row-major single-precision matrix. Dimensions are always >= 1.
class Matrix {
public:
    /// Zero-filled rows x cols matrix.
    Matrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of `data`; its length must be rows * cols and every
    /// element must be finite.
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    float operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
    float& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    /// "RxC", used in error messages.
    std::string shape_string() const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<float> data_;
};

struct Seed {
    std::uint64_t value = 0;
};

/// xorshift64* stream seeded through splitmix64 so that nearby seeds give
/// unrelated streams. Only integer arithmetic is involved, which makes the
/// output identical on every platform.
class Xorshift64Star {
public:
    explicit Xorshift64Star(Seed seed) noexcept;

    std::uint64_t next() noexcept;

    /// Top 24 bits mapped to [-1, 1). Exact in single precision.
    float next_symmetric() noexcept;

private:
    std::uint64_t state_;
};

/// C = A * B, accumulated in single precision with k ascending.
Matrix matmul_reference(const Matrix& a, const Matrix& b);

/// Uniform in [-1, 1) from Xorshift64Star(seed), filled row-major.
Matrix random_matrix(std::size_t rows, std::size_t cols, Seed seed);

Matrix transpose(const Matrix& a);

struct PaddedMatrix {
    Matrix matrix;
    std::size_t original_rows;
    std::size_t original_cols;
};

/// Rounds both dimensions up to a multiple of `quantum`, zero-filling the
/// new rows and columns.
PaddedMatrix pad_to_multiple(const Matrix& a, std::size_t quantum = 16);

/// Top-left rows x cols block of `a`.
Matrix crop(const Matrix& a, std::size_t rows, std::size_t cols);

/// max |x - ref| / max |ref| (plain max |x - ref| when ref is all zeros).
/// Throws ShapeError when shapes differ.
double max_relative_error(const Matrix& x, const Matrix& ref);

}  // namespace gemmbench
