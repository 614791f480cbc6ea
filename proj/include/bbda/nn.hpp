#pragma once

#include <cstdint>
#include <random>

#include "bbda/matrix.hpp"

namespace bbda {

// splitmix64; used to derive independent RNG streams from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Dense MLP: input -> hidden... -> bottleneck -> classes.
// tanh on hidden layers, identity on the bottleneck and classifier head.
// The bottleneck output is the feature vector; softmax of the head output
// is the class probability row.
struct MlpModel {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix2D> weights;  // layer l: dims[l] x dims[l+1]
    std::vector<Matrix2D> biases;   // layer l: 1 x dims[l+1]

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t bottleneck_dim() const { return layer_dims[layer_dims.size() - 2]; }
    std::size_t num_classes() const { return layer_dims.back(); }

    // Layers 0..L-3 are followed by tanh; bottleneck (L-2) and head (L-1) are linear.
    bool layer_uses_tanh(std::size_t l) const { return l + 2 < num_layers(); }
};

inline MlpModel make_mlp(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 3)
        throw ValidationError("MlpModel needs at least input, bottleneck, classes");
    MlpModel m;
    m.layer_dims = std::move(layer_dims);
    std::mt19937_64 gen(mix_seed(seed, 0x1717));
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        const std::size_t fan_in = m.layer_dims[l], fan_out = m.layer_dims[l + 1];
        const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix2D w(fan_in, fan_out);
        for (auto& v : w.data) v = dist(gen);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(1, fan_out);
    }
    return m;
}

// Row-wise softmax with max subtraction.
inline Matrix2D softmax(const Matrix2D& logits) {
    Matrix2D p(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        auto zi = logits.row(i);
        const double zmax = *std::max_element(zi.begin(), zi.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const double e = std::exp(zi[j] - zmax);
            p(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= sum;
    }
    return p;
}

struct ForwardCache {
    std::vector<Matrix2D> activations;  // activations[0] = x, post-activation per layer
    Matrix2D probs;

    const Matrix2D& logits() const { return activations.back(); }
    const Matrix2D& features() const { return activations[activations.size() - 2]; }
};

inline ForwardCache forward_cache(const MlpModel& m, const Matrix2D& x) {
    require_shape(x.cols == m.input_dim(), "forward: input width != model input dim");
    ForwardCache c;
    c.activations.reserve(m.num_layers() + 1);
    c.activations.push_back(x);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        Matrix2D z = matmul(c.activations.back(), m.weights[l]);
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += m.biases[l](0, j);
        if (m.layer_uses_tanh(l))
            for (auto& v : z.data) v = std::tanh(v);
        c.activations.push_back(std::move(z));
    }
    c.probs = softmax(c.activations.back());
    require_finite(c.probs, "forward probs");
    return c;
}

// (features, probs)
inline std::pair<Matrix2D, Matrix2D> forward(const MlpModel& m, const Matrix2D& x) {
    ForwardCache c = forward_cache(m, x);
    return {c.features(), c.probs};
}

struct Gradients {
    std::vector<Matrix2D> weights;
    std::vector<Matrix2D> biases;
};

inline Gradients zero_gradients(const MlpModel& m) {
    Gradients g;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        g.weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
        g.biases.emplace_back(1, m.biases[l].cols);
    }
    return g;
}

inline void accumulate(Gradients& acc, const Gradients& g, double scale = 1.0) {
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
        for (std::size_t k = 0; k < acc.weights[l].data.size(); ++k)
            acc.weights[l].data[k] += scale * g.weights[l].data[k];
        for (std::size_t k = 0; k < acc.biases[l].data.size(); ++k)
            acc.biases[l].data[k] += scale * g.biases[l].data[k];
    }
}

// Backprop from d(loss)/d(logits).
inline Gradients backward(const MlpModel& m, const ForwardCache& cache,
                          const Matrix2D& loss_grad_on_logits) {
    require_shape(loss_grad_on_logits.same_shape(cache.logits()),
                  "backward: gradient shape != logits shape");
    Gradients g = zero_gradients(m);
    Matrix2D delta = loss_grad_on_logits;
    for (std::size_t l = m.num_layers(); l-- > 0;) {
        g.weights[l] = matmul_at_b(cache.activations[l], delta);
        auto bs = column_sums(delta);
        std::copy(bs.begin(), bs.end(), g.biases[l].data.begin());
        if (l > 0) {
            Matrix2D prev = matmul_a_bt(delta, m.weights[l]);
            if (m.layer_uses_tanh(l - 1)) {
                const Matrix2D& a = cache.activations[l];
                for (std::size_t k = 0; k < prev.data.size(); ++k)
                    prev.data[k] *= 1.0 - a.data[k] * a.data[k];
            }
            delta = std::move(prev);
        }
    }
    return g;
}

struct OptimizerState {
    double learning_rate = 1e-2;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    std::vector<Matrix2D> vel_weights;
    std::vector<Matrix2D> vel_biases;
};

inline OptimizerState make_optimizer(const MlpModel& m, double lr, double momentum,
                                     double weight_decay) {
    OptimizerState opt;
    opt.learning_rate = lr;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        opt.vel_weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
        opt.vel_biases.emplace_back(1, m.biases[l].cols);
    }
    return opt;
}

// v <- momentum*v - lr*(grad + weight_decay*param); param <- param + v
inline void sgd_step(MlpModel& m, const Gradients& g, OptimizerState& opt) {
    auto step = [&](Matrix2D& param, const Matrix2D& grad, Matrix2D& vel) {
        require_shape(param.same_shape(grad) && param.same_shape(vel),
                      "sgd_step: shape mismatch");
        for (std::size_t k = 0; k < param.data.size(); ++k) {
            vel.data[k] = opt.momentum * vel.data[k] -
                          opt.learning_rate *
                              (grad.data[k] + opt.weight_decay * param.data[k]);
            param.data[k] += vel.data[k];
        }
    };
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        step(m.weights[l], g.weights[l], opt.vel_weights[l]);
        step(m.biases[l], g.biases[l], opt.vel_biases[l]);
    }
}

}  // namespace bbda
