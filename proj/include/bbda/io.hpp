#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bbda/datagen.hpp"

namespace bbda {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The only artifact that crosses the black-box boundary: per-sample soft
// predictions from the source model.
struct SoftPredictionSet {
    std::size_t K = 0;
    Matrix2D probs;  // n x K

    std::size_t size() const { return probs.rows; }
    std::vector<std::size_t> hard_labels() const {
        std::vector<std::size_t> h(probs.rows);
        for (std::size_t i = 0; i < probs.rows; ++i) h[i] = argmax_row(probs.row(i));
        return h;
    }
};

namespace detail {

inline std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    return f;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    return f;
}

}  // namespace detail

// Wire contract: header "K=<k> n=<n>", then "id, p_0, ..., p_{K-1}" with
// probabilities at 9 significant digits.
inline void save_predictions(std::ostream& os, const SoftPredictionSet& preds) {
    os << "K=" << preds.K << " n=" << preds.size() << "\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        os << i;
        for (std::size_t j = 0; j < preds.K; ++j)
            os << ", " << detail::fmt(preds.probs(i, j), "%.9g");
        os << "\n";
    }
}

inline void save_predictions(const std::string& path, const SoftPredictionSet& preds) {
    auto f = detail::open_out(path);
    save_predictions(f, preds);
    if (!f) throw IoError("write failed: " + path);
}

inline SoftPredictionSet load_predictions(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw IoError("predictions: missing header");
    std::size_t K = 0, n = 0;
    if (std::sscanf(header.c_str(), "K=%zu n=%zu", &K, &n) != 2 || K == 0)
        throw IoError("predictions: bad header: " + header);
    SoftPredictionSet out;
    out.K = K;
    out.probs = Matrix2D(n, K);
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw IoError("predictions: truncated file");
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        std::size_t id = 0;
        if (!(ls >> id) || id != i) throw IoError("predictions: bad sample id");
        for (std::size_t j = 0; j < K; ++j)
            if (!(ls >> out.probs(i, j))) throw IoError("predictions: short row");
    }
    return out;
}

inline SoftPredictionSet load_predictions(const std::string& path) {
    auto f = detail::open_in(path);
    return load_predictions(f);
}

struct RoundRecord {
    std::size_t round = 0;
    std::size_t H_size = 0;
    std::size_t L_size = 0;
    double H_purity = 0.0;
    double target_acc = 0.0;
    double l_kd = 0.0;
    double l_im = 0.0;
    double l_mix = 0.0;
};

inline void save_metrics(std::ostream& os, const std::vector<RoundRecord>& history) {
    os << "round, H_size, L_size, H_purity, target_acc, L_kd, L_im, L_mix\n";
    for (const auto& r : history) {
        os << r.round << ", " << r.H_size << ", " << r.L_size << ", "
           << detail::fmt(r.H_purity, "%.9g") << ", "
           << detail::fmt(r.target_acc, "%.9g") << ", "
           << detail::fmt(r.l_kd, "%.9g") << ", " << detail::fmt(r.l_im, "%.9g")
           << ", " << detail::fmt(r.l_mix, "%.9g") << "\n";
    }
}

inline void save_metrics(const std::string& path, const std::vector<RoundRecord>& history) {
    auto f = detail::open_out(path);
    save_metrics(f, history);
}

// Versioned text checkpoint; %.17g round-trips doubles exactly.
inline void save_checkpoint(std::ostream& os, const MlpModel& m) {
    os << "bbda-ckpt v1\n";
    os << "layers";
    for (auto d : m.layer_dims) os << " " << d;
    os << "\n";
    auto dump = [&](const Matrix2D& mat) {
        for (std::size_t i = 0; i < mat.rows; ++i) {
            for (std::size_t j = 0; j < mat.cols; ++j)
                os << (j ? " " : "") << detail::fmt(mat(i, j), "%.17g");
            os << "\n";
        }
    };
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        dump(m.weights[l]);
        dump(m.biases[l]);
    }
}

inline void save_checkpoint(const std::string& path, const MlpModel& m) {
    auto f = detail::open_out(path);
    save_checkpoint(f, m);
}

inline MlpModel load_checkpoint(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "bbda-ckpt v1")
        throw IoError("checkpoint: bad or missing version header");
    if (!std::getline(is, line)) throw IoError("checkpoint: missing layer line");
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != "layers") throw IoError("checkpoint: missing layer dims");
    std::vector<std::size_t> dims;
    for (std::size_t d; ls >> d;) dims.push_back(d);
    MlpModel m = make_mlp(dims, 0);
    auto read = [&](Matrix2D& mat) {
        for (auto& v : mat.data)
            if (!(is >> v)) throw IoError("checkpoint: truncated parameters");
    };
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        read(m.weights[l]);
        read(m.biases[l]);
    }
    return m;
}

inline MlpModel load_checkpoint(const std::string& path) {
    auto f = detail::open_in(path);
    return load_checkpoint(f);
}

// Dataset dump: header, then "s <label> <features...>" source rows and
// "t <label> <features...>" target rows. Target labels live in the file for
// evaluation only; the adaptation path never reads them for training.
inline void save_dataset(std::ostream& os, const DomainPair& dp) {
    os << "bbda-dataset v1\n";
    os << "K=" << dp.K << " dim=" << dp.dim << " n_s=" << dp.source_x.rows
       << " n_t=" << dp.target_x.rows << "\n";
    auto dump = [&](char tag, const Matrix2D& x, const std::vector<std::size_t>& y) {
        for (std::size_t i = 0; i < x.rows; ++i) {
            os << tag << " " << y[i];
            for (std::size_t j = 0; j < x.cols; ++j)
                os << " " << detail::fmt(x(i, j), "%.17g");
            os << "\n";
        }
    };
    dump('s', dp.source_x, dp.source_y);
    dump('t', dp.target_x, dp.hidden_target_y_);
}

inline void save_dataset(const std::string& path, const DomainPair& dp) {
    auto f = detail::open_out(path);
    save_dataset(f, dp);
}

inline DomainPair load_dataset(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "bbda-dataset v1")
        throw IoError("dataset: bad or missing version header");
    if (!std::getline(is, line)) throw IoError("dataset: missing size header");
    std::size_t K = 0, dim = 0, n_s = 0, n_t = 0;
    if (std::sscanf(line.c_str(), "K=%zu dim=%zu n_s=%zu n_t=%zu", &K, &dim, &n_s,
                    &n_t) != 4)
        throw IoError("dataset: bad size header: " + line);
    DomainPair dp;
    dp.K = K;
    dp.dim = dim;
    dp.source_x = Matrix2D(n_s, dim);
    dp.source_y.resize(n_s);
    dp.target_x = Matrix2D(n_t, dim);
    dp.hidden_target_y_.resize(n_t);
    auto read = [&](char tag, Matrix2D& x, std::vector<std::size_t>& y) {
        for (std::size_t i = 0; i < x.rows; ++i) {
            char got;
            if (!(is >> got) || got != tag) throw IoError("dataset: bad row tag");
            if (!(is >> y[i])) throw IoError("dataset: bad label");
            for (std::size_t j = 0; j < dim; ++j)
                if (!(is >> x(i, j))) throw IoError("dataset: truncated row");
        }
    };
    read('s', dp.source_x, dp.source_y);
    read('t', dp.target_x, dp.hidden_target_y_);
    return dp;
}

inline DomainPair load_dataset(const std::string& path) {
    auto f = detail::open_in(path);
    return load_dataset(f);
}

inline std::string read_file(const std::string& path) {
    auto f = detail::open_in(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace bbda
