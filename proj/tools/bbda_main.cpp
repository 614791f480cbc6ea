// Command-line driver: generate synthetic domain pairs, train/export the
// source side, run black-box adaptation, and script the sweep/ablation tables.
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "bbda/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bbda;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitStall = 4;

struct CliOpts {
    std::string config_path;
    std::string profile;
    std::string out_dir;
    long long seed = -1;
};

RunConfig resolve_config(const CliOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = parse_config_file(opts.config_path);
    if (!opts.profile.empty()) {
        cfg.profile = opts.profile;
        apply_profile(cfg.hp, cfg.profile);
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.seeds = {std::uint64_t(opts.seed)};
    cfg.hp.validate();
    fs::create_directories(cfg.out_dir);
    return cfg;
}

std::string seed_path(const RunConfig& cfg, const std::string& stem, std::uint64_t seed,
                      const std::string& ext) {
    return (fs::path(cfg.out_dir) / (stem + "_seed" + std::to_string(seed) + ext))
        .string();
}

Hyperparams seeded(const RunConfig& cfg, std::uint64_t seed) {
    Hyperparams hp = cfg.hp;
    hp.seed = seed;
    return hp;
}

int cmd_gen(const RunConfig& cfg) {
    for (auto seed : cfg.seeds) {
        const DomainPair dp =
            make_domain_pair(cfg.dataset, cfg.shift(seed), seed);
        const std::string path = seed_path(cfg, "dataset", seed, ".txt");
        save_dataset(path, dp);
        std::cout << "wrote " << path << " (K=" << dp.K << " dim=" << dp.dim
                  << " n_s=" << dp.source_x.rows << " n_t=" << dp.target_x.rows
                  << ")\n";
    }
    return 0;
}

int cmd_source(const RunConfig& cfg) {
    for (auto seed : cfg.seeds) {
        const DomainPair dp = load_dataset(seed_path(cfg, "dataset", seed, ".txt"));
        const Hyperparams hp = seeded(cfg, seed);

        // 90/10 held-out split on the source side for an honest accuracy report.
        const std::size_t n = dp.source_x.rows;
        auto order = iterate_batches(n, n, mix_seed(seed, 0x5917), 0).front();
        const std::size_t n_train = n - n / 10;
        std::vector<std::size_t> train_idx(order.begin(), order.begin() + long(n_train));
        std::vector<std::size_t> hold_idx(order.begin() + long(n_train), order.end());
        std::vector<std::size_t> train_y, hold_y;
        for (auto i : train_idx) train_y.push_back(dp.source_y[i]);
        for (auto i : hold_idx) hold_y.push_back(dp.source_y[i]);

        const MlpModel source =
            train_source(gather_rows(dp.source_x, train_idx), train_y, dp.K, hp);
        const double train_acc =
            evaluate(source, gather_rows(dp.source_x, train_idx), train_y).accuracy;
        const double hold_acc =
            hold_idx.empty()
                ? 0.0
                : evaluate(source, gather_rows(dp.source_x, hold_idx), hold_y).accuracy;

        save_checkpoint(seed_path(cfg, "source", seed, ".ckpt"), source);
        save_predictions(seed_path(cfg, "preds", seed, ".txt"),
                         export_predictions(source, dp.target_x));
        std::cout << "seed " << seed << ": source train acc " << train_acc
                  << ", held-out acc " << hold_acc << ", wrote "
                  << seed_path(cfg, "preds", seed, ".txt") << "\n";
    }
    return 0;
}

// Black-box side: consumes only the dataset's target rows and the predictions
// file. No source checkpoint path is ever accepted or opened.
int cmd_adapt(const RunConfig& cfg, const std::string& preds_override) {
    for (auto seed : cfg.seeds) {
        const DomainPair dp = load_dataset(seed_path(cfg, "dataset", seed, ".txt"));
        const std::string preds_path = preds_override.empty()
                                           ? seed_path(cfg, "preds", seed, ".txt")
                                           : preds_override;
        const SoftPredictionSet preds = load_predictions(preds_path);
        const RunResult res = run_adaptation(dp.target_x, preds, seeded(cfg, seed),
                                             &dp.eval_only_target_labels());
        save_checkpoint(seed_path(cfg, "target", seed, ".ckpt"), res.model);
        save_metrics(seed_path(cfg, "metrics", seed, ".txt"), res.history);
        std::cout << "seed " << seed << ": status " << res.status << ", rounds "
                  << res.history.size() << ", crude acc " << res.crude_accuracy
                  << ", final acc " << res.final_accuracy << "\n";
    }
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& param,
              const std::string& values_csv) {
    std::vector<double> values;
    {
        std::istringstream ss(values_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            values.push_back(detail::to_real("values", item));
    }
    if (values.empty()) throw ConfigError("sweep: empty values list");
    if (param != "alpha" && param != "beta" && param != "lambda")
        throw ConfigError("sweep: param must be alpha, beta or lambda");

    // Source side is fixed per seed; only the adaptation threshold varies.
    std::vector<std::pair<DomainPair, SoftPredictionSet>> runs;
    for (auto seed : cfg.seeds) {
        DomainPair dp = make_domain_pair(cfg.dataset, cfg.shift(seed), seed);
        const MlpModel source =
            train_source(dp.source_x, dp.source_y, dp.K, seeded(cfg, seed));
        SoftPredictionSet preds = export_predictions(source, dp.target_x);
        runs.emplace_back(std::move(dp), std::move(preds));
    }

    const std::string table_path =
        (fs::path(cfg.out_dir) / ("sweep_" + param + ".txt")).string();
    std::ofstream table(table_path);
    table << param << ", mean_final_acc, mean_crude_acc, mean_incremental_rounds\n";
    for (double v : values) {
        double acc = 0.0, crude = 0.0, rounds = 0.0;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            Hyperparams hp = seeded(cfg, cfg.seeds[s]);
            if (param == "alpha") hp.alpha = v;
            else if (param == "beta") hp.beta = v;
            else hp.lambda_stop = v;
            const RunResult res =
                run_adaptation(runs[s].first.target_x, runs[s].second, hp,
                               &runs[s].first.eval_only_target_labels());
            acc += res.final_accuracy;
            crude += res.crude_accuracy;
            // history = warm-up + incremental rounds + fine-tune record
            rounds += double(res.history.size() - 2);
        }
        const double n = double(cfg.seeds.size());
        table << detail::fmt(v, "%.9g") << ", " << detail::fmt(acc / n, "%.9g")
              << ", " << detail::fmt(crude / n, "%.9g") << ", "
              << detail::fmt(rounds / n, "%.9g") << "\n";
        std::cout << param << "=" << v << ": mean final acc " << acc / n << "\n";
    }
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    struct Row {
        std::string name;
        LossWeights w;
    };
    const std::vector<Row> rows = {
        {"kd", {1.0, 0.0, 0.0}},
        {"kd+im", {1.0, 1.0, 0.0}},
        {"kd+mix", {1.0, 0.0, 1.0}},
        {"kd+im+mix", {1.0, 1.0, 1.0}},
    };
    const std::string table_path = (fs::path(cfg.out_dir) / "ablation.txt").string();
    std::ofstream table(table_path);
    table << "losses, mean_final_acc, mean_crude_acc\n";
    for (const auto& row : rows) {
        double acc = 0.0, crude = 0.0;
        for (auto seed : cfg.seeds) {
            Hyperparams hp = seeded(cfg, seed);
            hp.loss_weights = row.w;
            const DomainPair dp = make_domain_pair(cfg.dataset, cfg.shift(seed), seed);
            const RunResult res = run_full(dp, hp);
            acc += res.final_accuracy;
            crude += res.crude_accuracy;
        }
        const double n = double(cfg.seeds.size());
        table << row.name << ", " << detail::fmt(acc / n, "%.9g") << ", "
              << detail::fmt(crude / n, "%.9g") << "\n";
        std::cout << row.name << ": mean final acc " << acc / n << "\n";
    }
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"incremental pseudo-labeling for black-box domain adaptation"};
    app.require_subcommand(1);

    CliOpts opts;
    app.add_option("--config", opts.config_path, "key=value config file");
    app.add_option("--profile", opts.profile,
                   "threshold profile: office | office-home | visda | custom");
    app.add_option("--seed", opts.seed, "single seed (overrides config seeds)");
    app.add_option("--out", opts.out_dir, "output directory");

    auto* gen = app.add_subcommand("gen", "generate synthetic domain pairs");
    auto* source = app.add_subcommand("source", "train source model, export predictions");
    auto* adapt = app.add_subcommand("adapt", "adapt from a predictions file");
    std::string preds_override;
    adapt->add_option("--predictions", preds_override,
                      "predictions file (default <out>/preds_seed<N>.txt)");
    auto* sweep = app.add_subcommand("sweep", "threshold sensitivity sweep");
    std::string sweep_param, sweep_values;
    sweep->add_option("--param", sweep_param, "alpha | beta | lambda")->required();
    sweep->add_option("--values", sweep_values, "comma-separated grid")->required();
    auto* ablate = app.add_subcommand("ablate", "loss-term ablation table");

    try {
        app.parse(argc, argv);
        const RunConfig cfg = resolve_config(opts);
        if (gen->parsed()) return cmd_gen(cfg);
        if (source->parsed()) return cmd_source(cfg);
        if (adapt->parsed()) return cmd_adapt(cfg, preds_override);
        if (sweep->parsed()) return cmd_sweep(cfg, sweep_param, sweep_values);
        if (ablate->parsed()) return cmd_ablate(cfg);
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const StallError& e) {
        std::cerr << "selection stall: " << e.what() << "\n";
        return kExitStall;
    }
}
