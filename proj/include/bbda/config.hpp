#pragma once

#include <map>

#include "bbda/io.hpp"
#include "bbda/losses.hpp"
#include "bbda/selector.hpp"

namespace bbda {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Hyperparams {
    // selection thresholds
    double alpha = 0.8;
    double beta = 0.3;
    double lambda_stop = 0.1;
    double delta = 0.6;
    double theta = 0.3;
    double theta_step = 0.05;
    double theta_cap = 0.9;
    // losses
    double gamma = 0.1;  // label smoothing
    double omega = 0.3;  // Beta(omega, omega) for mixup
    LossWeights loss_weights;
    bool finetune_full_objective = false;  // default: IM-only fine-tune
    // optimizer
    double lr = 1e-2;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    // schedule
    std::size_t batch_size = 64;
    std::size_t epochs_source = 30;
    std::size_t epochs_crude = 15;
    std::size_t epochs_student = 15;
    std::size_t epochs_round = 10;  // warm-up and each incremental phi^r
    std::size_t epochs_finetune = 10;
    std::size_t max_rounds = 20;
    // model
    std::size_t hidden_dim = 64;
    std::size_t bottleneck_dim = 32;
    std::uint64_t seed = 1;

    GateParams gate() const { return {alpha, beta, theta, theta_step, theta_cap}; }

    void validate() const {
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(alpha) || !unit(delta) || !unit(theta) || !unit(lambda_stop))
            throw ConfigError("alpha/delta/theta/lambda must be in [0,1]");
        if (beta < 0.0) throw ConfigError("beta must be >= 0");
        if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
        if (omega <= 0.0) throw ConfigError("omega must be > 0");
        if (batch_size == 0) throw ConfigError("batch_size must be > 0");
    }
};

struct RunConfig {
    std::string profile = "office";
    DatasetSpec dataset;
    double rotation = 1.3;
    double translation = 2.0;
    double noise = 0.9;
    Hyperparams hp;
    std::string out_dir = ".";
    std::vector<std::uint64_t> seeds = {1};

    ShiftSpec shift(std::uint64_t seed) const {
        return make_shift(rotation, translation, noise, dataset.dim, seed);
    }
};

// Per-dataset threshold profiles.
inline void apply_profile(Hyperparams& hp, const std::string& name) {
    if (name == "office") {
        hp.alpha = 0.8;
        hp.beta = 0.3;
        hp.lambda_stop = 0.1;
    } else if (name == "office-home") {
        hp.alpha = 0.6;
        hp.beta = 0.2;
        hp.lambda_stop = 0.2;
    } else if (name == "visda") {
        hp.alpha = 0.7;
        hp.beta = 0.2;
        hp.lambda_stop = 0.25;
    } else if (name != "custom") {
        throw ConfigError("unknown profile: " + name);
    }
}

namespace detail {

inline std::map<std::string, std::string> parse_kv(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + v);
    }
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    const double x = to_real(key, v);
    if (x < 0 || x != std::floor(x)) throw ConfigError("bad count for " + key + ": " + v);
    return std::size_t(x);
}

}  // namespace detail

// Flat key=value config. A "profile=" key is applied first so later keys
// override the profile's thresholds.
inline RunConfig parse_config(std::istream& is) {
    auto kv = detail::parse_kv(is);
    RunConfig cfg;
    if (auto it = kv.find("profile"); it != kv.end()) cfg.profile = it->second;
    apply_profile(cfg.hp, cfg.profile);

    using detail::to_count;
    using detail::to_real;
    for (const auto& [k, v] : kv) {
        if (k == "profile") continue;
        else if (k == "K") cfg.dataset.K = to_count(k, v);
        else if (k == "dim") cfg.dataset.dim = to_count(k, v);
        else if (k == "n_s") cfg.dataset.n_s = to_count(k, v);
        else if (k == "n_t") cfg.dataset.n_t = to_count(k, v);
        else if (k == "separation") cfg.dataset.separation = to_real(k, v);
        else if (k == "blob_sigma") cfg.dataset.blob_sigma = to_real(k, v);
        else if (k == "imbalance") {
            // geometric prior ratio r: class k gets weight r^k, normalized
            const double r = to_real(k, v);
            if (r <= 0.0) throw ConfigError("imbalance ratio must be > 0");
            cfg.dataset.class_priors.clear();
            double w = 1.0;
            for (std::size_t c = 0; c < cfg.dataset.K; ++c, w *= r)
                cfg.dataset.class_priors.push_back(w);
        }
        else if (k == "rotation") cfg.rotation = to_real(k, v);
        else if (k == "translation") cfg.translation = to_real(k, v);
        else if (k == "noise") cfg.noise = to_real(k, v);
        else if (k == "alpha") cfg.hp.alpha = to_real(k, v);
        else if (k == "beta") cfg.hp.beta = to_real(k, v);
        else if (k == "lambda") cfg.hp.lambda_stop = to_real(k, v);
        else if (k == "delta") cfg.hp.delta = to_real(k, v);
        else if (k == "theta") cfg.hp.theta = to_real(k, v);
        else if (k == "theta_step") cfg.hp.theta_step = to_real(k, v);
        else if (k == "theta_cap") cfg.hp.theta_cap = to_real(k, v);
        else if (k == "gamma") cfg.hp.gamma = to_real(k, v);
        else if (k == "omega") cfg.hp.omega = to_real(k, v);
        else if (k == "w_kd") cfg.hp.loss_weights.kd = to_real(k, v);
        else if (k == "w_im") cfg.hp.loss_weights.im = to_real(k, v);
        else if (k == "w_mix") cfg.hp.loss_weights.mix = to_real(k, v);
        else if (k == "finetune_full") cfg.hp.finetune_full_objective = to_real(k, v) != 0.0;
        else if (k == "lr") cfg.hp.lr = to_real(k, v);
        else if (k == "momentum") cfg.hp.momentum = to_real(k, v);
        else if (k == "weight_decay") cfg.hp.weight_decay = to_real(k, v);
        else if (k == "batch_size") cfg.hp.batch_size = to_count(k, v);
        else if (k == "epochs_source") cfg.hp.epochs_source = to_count(k, v);
        else if (k == "epochs_crude") cfg.hp.epochs_crude = to_count(k, v);
        else if (k == "epochs_student") cfg.hp.epochs_student = to_count(k, v);
        else if (k == "epochs_round") cfg.hp.epochs_round = to_count(k, v);
        else if (k == "epochs_finetune") cfg.hp.epochs_finetune = to_count(k, v);
        else if (k == "max_rounds") cfg.hp.max_rounds = to_count(k, v);
        else if (k == "hidden_dim") cfg.hp.hidden_dim = to_count(k, v);
        else if (k == "bottleneck_dim") cfg.hp.bottleneck_dim = to_count(k, v);
        else if (k == "seed") cfg.seeds = {std::uint64_t(to_count(k, v))};
        else if (k == "seeds") {
            cfg.seeds.clear();
            std::istringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ','))
                cfg.seeds.push_back(std::uint64_t(to_count(k, item)));
            if (cfg.seeds.empty()) throw ConfigError("empty seeds list");
        }
        else if (k == "out") cfg.out_dir = v;
        else throw ConfigError("unknown config key: " + k);
    }
    cfg.hp.validate();
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    return parse_config(f);
}

}  // namespace bbda
