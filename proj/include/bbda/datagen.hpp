#pragma once

#include <numeric>

#include "bbda/nn.hpp"

namespace bbda {

struct DatasetSpec {
    std::size_t K = 5;
    std::size_t dim = 16;
    std::size_t n_s = 2000;
    std::size_t n_t = 2000;
    double separation = 4.0;  // norm of each class mean
    double blob_sigma = 1.0;
    std::vector<double> class_priors;  // empty = balanced
};

struct ShiftSpec {
    double rotation_rad = 0.0;  // rotation within a seeded random 2D subspace
    std::vector<double> translation;
    double noise_scale = 0.0;  // extra isotropic noise on target samples
};

// Seeded random translation direction scaled to the given magnitude.
inline ShiftSpec make_shift(double rotation_rad, double translation_mag,
                            double noise_scale, std::size_t dim, std::uint64_t seed) {
    ShiftSpec s;
    s.rotation_rad = rotation_rad;
    s.noise_scale = noise_scale;
    s.translation.assign(dim, 0.0);
    if (translation_mag != 0.0) {
        std::mt19937_64 gen(mix_seed(seed, 0x7a3));
        std::normal_distribution<double> nd(0.0, 1.0);
        for (auto& v : s.translation) v = nd(gen);
        double norm = l2_norm(s.translation);
        if (norm <= 0.0) norm = 1.0;
        for (auto& v : s.translation) v *= translation_mag / norm;
    }
    return s;
}

struct DomainPair {
    Matrix2D source_x;
    std::vector<std::size_t> source_y;
    Matrix2D target_x;
    std::size_t K = 0;
    std::size_t dim = 0;

    // Ground-truth target labels exist only for evaluation; training paths
    // must never read them.
    const std::vector<std::size_t>& eval_only_target_labels() const {
        return hidden_target_y_;
    }
    std::vector<std::size_t> hidden_target_y_;
};

namespace detail {

inline std::vector<std::size_t> sample_labels(std::size_t n, std::size_t K,
                                              const std::vector<double>& priors,
                                              std::mt19937_64& gen) {
    std::vector<double> p = priors;
    if (p.empty()) p.assign(K, 1.0 / double(K));
    if (p.size() != K) throw ValidationError("class_priors size != K");
    std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = dist(gen);
    return y;
}

// Two seeded orthonormal vectors spanning the rotation plane.
inline std::pair<std::vector<double>, std::vector<double>> rotation_plane(
    std::size_t dim, std::mt19937_64& gen) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> u(dim), v(dim);
    for (auto& x : u) x = nd(gen);
    for (auto& x : v) x = nd(gen);
    double nu = l2_norm(u);
    for (auto& x : u) x /= nu;
    const double proj = dot(std::span<const double>(v), std::span<const double>(u));
    for (std::size_t j = 0; j < dim; ++j) v[j] -= proj * u[j];
    double nv = l2_norm(v);
    if (nv <= 1e-12) throw ValidationError("degenerate rotation plane");
    for (auto& x : v) x /= nv;
    return {u, v};
}

inline void rotate_in_plane(std::span<double> x, const std::vector<double>& u,
                            const std::vector<double>& v, double angle) {
    const double cu = dot(std::span<const double>(x.data(), x.size()), u);
    const double cv = dot(std::span<const double>(x.data(), x.size()), v);
    const double ru = cu * std::cos(angle) - cv * std::sin(angle);
    const double rv = cu * std::sin(angle) + cv * std::cos(angle);
    for (std::size_t j = 0; j < x.size(); ++j)
        x[j] += (ru - cu) * u[j] + (rv - cv) * v[j];
}

}  // namespace detail

// K Gaussian blobs with seeded means; target = same blobs pushed through the
// shift (plane rotation + translation + extra noise). Pure function of
// (spec, shift, seed).
inline DomainPair make_domain_pair(const DatasetSpec& spec, const ShiftSpec& shift,
                                   std::uint64_t seed) {
    if (spec.K < 2) throw ValidationError("make_domain_pair: K must be >= 2");
    if (spec.dim < 2) throw ValidationError("make_domain_pair: dim must be >= 2");
    if (spec.separation <= 0.0)
        throw ValidationError("make_domain_pair: zero inter-class separation");
    if (!shift.translation.empty() && shift.translation.size() != spec.dim)
        throw ValidationError("make_domain_pair: translation dim mismatch");

    std::mt19937_64 gen(mix_seed(seed, 0xda7a));
    std::normal_distribution<double> nd(0.0, 1.0);

    Matrix2D means(spec.K, spec.dim);
    for (std::size_t k = 0; k < spec.K; ++k) {
        for (std::size_t j = 0; j < spec.dim; ++j) means(k, j) = nd(gen);
        const double norm = l2_norm(means.row(k));
        for (std::size_t j = 0; j < spec.dim; ++j)
            means(k, j) *= spec.separation / norm;
    }

    DomainPair dp;
    dp.K = spec.K;
    dp.dim = spec.dim;
    dp.source_y = detail::sample_labels(spec.n_s, spec.K, spec.class_priors, gen);
    dp.source_x = Matrix2D(spec.n_s, spec.dim);
    for (std::size_t i = 0; i < spec.n_s; ++i)
        for (std::size_t j = 0; j < spec.dim; ++j)
            dp.source_x(i, j) = means(dp.source_y[i], j) + spec.blob_sigma * nd(gen);

    auto [u, v] = detail::rotation_plane(spec.dim, gen);
    dp.hidden_target_y_ =
        detail::sample_labels(spec.n_t, spec.K, spec.class_priors, gen);
    dp.target_x = Matrix2D(spec.n_t, spec.dim);
    for (std::size_t i = 0; i < spec.n_t; ++i) {
        auto row = dp.target_x.row(i);
        for (std::size_t j = 0; j < spec.dim; ++j)
            row[j] = means(dp.hidden_target_y_[i], j) + spec.blob_sigma * nd(gen);
        if (shift.rotation_rad != 0.0)
            detail::rotate_in_plane(row, u, v, shift.rotation_rad);
        if (!shift.translation.empty())
            for (std::size_t j = 0; j < spec.dim; ++j) row[j] += shift.translation[j];
        if (shift.noise_scale != 0.0)
            for (std::size_t j = 0; j < spec.dim; ++j)
                row[j] += shift.noise_scale * nd(gen);
    }
    return dp;
}

// Seeded shuffle per epoch; the last partial batch is kept.
inline std::vector<std::vector<std::size_t>> iterate_batches(std::size_t n,
                                                             std::size_t batch_size,
                                                             std::uint64_t seed,
                                                             std::size_t epoch) {
    if (batch_size == 0) throw ValidationError("iterate_batches: batch_size 0");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(mix_seed(seed, 0xba7c000 + epoch));
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + long(start), order.begin() + long(end));
    }
    return batches;
}

// Rows of m selected by index list.
inline Matrix2D gather_rows(const Matrix2D& m, const std::vector<std::size_t>& idx) {
    Matrix2D out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
    return out;
}

}  // namespace bbda
