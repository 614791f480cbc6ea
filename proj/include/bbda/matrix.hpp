#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbda {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StallError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles.
struct Matrix2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix2D() = default;
    Matrix2D(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool same_shape(const Matrix2D& other) const {
        return rows == other.rows && cols == other.cols;
    }

    bool is_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](double v) { return std::isfinite(v); });
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline void require_shape(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

inline void require_finite(const Matrix2D& m, const std::string& what) {
    if (!m.is_finite()) throw DivergenceError("non-finite values in " + what);
}

// C = A * B
inline Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
    require_shape(a.cols == b.rows, "matmul: inner dimensions differ");
    Matrix2D c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                c(i, j) += aik * b(k, j);
        }
    return c;
}

// C = A^T * B
inline Matrix2D matmul_at_b(const Matrix2D& a, const Matrix2D& b) {
    require_shape(a.rows == b.rows, "matmul_at_b: row counts differ");
    Matrix2D c(a.cols, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                c(k, j) += aik * b(i, j);
        }
    return c;
}

// C = A * B^T
inline Matrix2D matmul_a_bt(const Matrix2D& a, const Matrix2D& b) {
    require_shape(a.cols == b.cols, "matmul_a_bt: column counts differ");
    Matrix2D c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    return c;
}

inline std::vector<double> column_sums(const Matrix2D& m) {
    std::vector<double> s(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) s[j] += m(i, j);
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double l2_norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

// Cosine distance 1 - cos(a, b); zero-norm vectors use the orthogonal
// convention, distance 1.
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na <= 0.0 || nb <= 0.0) return 1.0;
    return 1.0 - dot(a, b) / (na * nb);
}

inline std::size_t argmax_row(std::span<const double> r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
        if (r[j] > r[best]) best = j;
    return best;
}

}  // namespace bbda
