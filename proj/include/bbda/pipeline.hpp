#pragma once

#include "bbda/config.hpp"

namespace bbda {

// Disjoint high/low confidence index pools over the target set. Promotion
// only; there is no demotion API.
struct ConfidencePools {
    std::vector<bool> in_high;
    Matrix2D pseudo_soft;                  // per-sample stored teacher row
    std::vector<std::size_t> pseudo_hard;  // argmax of the stored row
    std::vector<std::vector<std::size_t>> round_promoted;

    static ConfidencePools init(const SoftPredictionSet& src_preds) {
        ConfidencePools p;
        p.in_high.assign(src_preds.size(), false);
        p.pseudo_soft = src_preds.probs;
        p.pseudo_hard = src_preds.hard_labels();
        return p;
    }

    std::size_t size() const { return in_high.size(); }
    std::size_t high_count() const {
        return std::size_t(std::count(in_high.begin(), in_high.end(), true));
    }
    std::size_t low_count() const { return size() - high_count(); }

    std::vector<std::size_t> high_indices() const { return indices(true); }
    std::vector<std::size_t> low_indices() const { return indices(false); }

    void begin_round() { round_promoted.emplace_back(); }

    void promote(std::size_t i) {
        if (i >= size()) throw ValidationError("promote: index out of range");
        if (in_high[i]) throw ValidationError("promote: sample already high-confidence");
        in_high[i] = true;
        if (round_promoted.empty()) round_promoted.emplace_back();
        round_promoted.back().push_back(i);
    }

    void relabel(std::size_t i, std::span<const double> soft, std::size_t hard) {
        std::copy(soft.begin(), soft.end(), pseudo_soft.row(i).begin());
        pseudo_hard[i] = hard;
    }

private:
    std::vector<std::size_t> indices(bool high) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < size(); ++i)
            if (in_high[i] == high) out.push_back(i);
        return out;
    }
};

struct Evaluation {
    double accuracy = 0.0;
    std::vector<double> per_class;
};

inline Evaluation evaluate(const MlpModel& m, const Matrix2D& x,
                           const std::vector<std::size_t>& labels) {
    require_shape(x.rows == labels.size(), "evaluate: label count mismatch");
    const Matrix2D probs = forward(m, x).second;
    Evaluation ev;
    std::vector<std::size_t> correct(m.num_classes(), 0), total(m.num_classes(), 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        ++total[labels[i]];
        if (argmax_row(probs.row(i)) == labels[i]) ++correct[labels[i]];
    }
    std::size_t hits = 0;
    for (std::size_t k = 0; k < m.num_classes(); ++k) {
        hits += correct[k];
        ev.per_class.push_back(total[k] ? double(correct[k]) / double(total[k]) : 0.0);
    }
    ev.accuracy = x.rows ? double(hits) / double(x.rows) : 0.0;
    return ev;
}

namespace detail {

struct TrainResult {
    double kd = 0.0;
    double im = 0.0;
    double mix = 0.0;  // last-epoch means
};

// SGD over batches of `indices`, minimizing the weighted objective against
// per-sample teacher rows. One mixup eta per batch; the partner batch is a
// shuffle of the same batch.
inline TrainResult train_distill(MlpModel& m, const Matrix2D& x,
                                 const Matrix2D& teacher,
                                 const std::vector<std::size_t>& indices,
                                 const Hyperparams& hp, const LossWeights& w,
                                 std::size_t epochs, std::uint64_t seed) {
    if (indices.empty()) throw ValidationError("train_distill: empty index set");
    OptimizerState opt = make_optimizer(m, hp.lr, hp.momentum, hp.weight_decay);
    std::mt19937_64 gen(mix_seed(seed, 0xe7a));
    TrainResult res;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        double kd = 0.0, im = 0.0, mix = 0.0;
        const auto batches = iterate_batches(indices.size(), hp.batch_size, seed, epoch);
        for (const auto& local : batches) {
            std::vector<std::size_t> batch(local.size());
            for (std::size_t i = 0; i < local.size(); ++i) batch[i] = indices[local[i]];
            const double eta = sample_beta(hp.omega, gen);
            std::vector<std::size_t> partner = batch;
            std::shuffle(partner.begin(), partner.end(), gen);
            const TotalLoss loss =
                total_loss(m, gather_rows(x, batch), gather_rows(teacher, batch),
                           gather_rows(x, partner), eta, w);
            if (!std::isfinite(loss.value))
                throw DivergenceError("train_distill: non-finite loss");
            sgd_step(m, loss.grads, opt);
            kd += loss.kd;
            im += loss.im;
            mix += loss.mix;
        }
        res.kd = kd / double(batches.size());
        res.im = im / double(batches.size());
        res.mix = mix / double(batches.size());
    }
    return res;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace detail

inline std::vector<std::size_t> model_dims(std::size_t input, std::size_t K,
                                           const Hyperparams& hp) {
    return {input, hp.hidden_dim, hp.bottleneck_dim, K};
}

// Source side: smoothed cross-entropy on labeled source data.
inline MlpModel train_source(const Matrix2D& x, const std::vector<std::size_t>& y,
                             std::size_t K, const Hyperparams& hp) {
    MlpModel m = make_mlp(model_dims(x.cols, K, hp), mix_seed(hp.seed, 0x50c));
    const Matrix2D q = smooth_labels(one_hot(y, K), hp.gamma, K);
    OptimizerState opt = make_optimizer(m, hp.lr, hp.momentum, hp.weight_decay);
    for (std::size_t epoch = 0; epoch < hp.epochs_source; ++epoch) {
        for (const auto& batch :
             iterate_batches(x.rows, hp.batch_size, mix_seed(hp.seed, 0x50c), epoch)) {
            ForwardCache cache = forward_cache(m, gather_rows(x, batch));
            LossValue loss = cross_entropy_smoothed(cache.probs, gather_rows(q, batch));
            if (!std::isfinite(loss.value))
                throw DivergenceError("train_source: non-finite loss");
            Gradients g = backward(m, cache, loss.grad_on_logits);
            sgd_step(m, g, opt);
        }
    }
    return m;
}

inline SoftPredictionSet export_predictions(const MlpModel& source, const Matrix2D& target_x) {
    SoftPredictionSet preds;
    preds.K = source.num_classes();
    preds.probs = forward(source, target_x).second;
    return preds;
}

// Crude target model phi^0: distillation plus mixup consistency over all
// target samples against the exported source predictions.
inline MlpModel train_crude_target(const Matrix2D& target_x,
                                   const SoftPredictionSet& src_preds,
                                   const Hyperparams& hp) {
    MlpModel m = make_mlp(model_dims(target_x.cols, src_preds.K, hp),
                          mix_seed(hp.seed, 0xc70d));
    detail::train_distill(m, target_x, src_preds.probs,
                          detail::all_indices(target_x.rows), hp,
                          LossWeights{1.0, 0.0, 1.0}, hp.epochs_crude,
                          mix_seed(hp.seed, 0xc71));
    return m;
}

// Student network: KL distillation only; its bottleneck features drive the
// warm-up prototype computation.
inline MlpModel train_student(const Matrix2D& target_x,
                              const SoftPredictionSet& src_preds,
                              const Hyperparams& hp) {
    MlpModel m = make_mlp(model_dims(target_x.cols, src_preds.K, hp),
                          mix_seed(hp.seed, 0x57d));
    detail::train_distill(m, target_x, src_preds.probs,
                          detail::all_indices(target_x.rows), hp,
                          LossWeights{1.0, 0.0, 0.0}, hp.epochs_student,
                          mix_seed(hp.seed, 0x57e));
    return m;
}

struct RunState {
    std::size_t round = 0;
    MlpModel model_phi0;  // frozen after crude training
    MlpModel model_phir;
    ConfidencePools pools;
    std::vector<RoundRecord> history;
    std::size_t stall_count = 0;
    std::string status = "running";
};

struct RunResult {
    MlpModel model;
    std::vector<RoundRecord> history;
    std::string status;
    double crude_accuracy = 0.0;
    double final_accuracy = 0.0;
    double source_pred_accuracy = 0.0;  // accuracy of the exported hard labels
    double warmup_H_purity = 0.0;
};

namespace detail {

inline RoundRecord make_record(const RunState& st, const Matrix2D& target_x,
                               const std::vector<std::size_t>* eval_labels,
                               const TrainResult& tr) {
    RoundRecord rec;
    rec.round = st.round;
    rec.H_size = st.pools.high_count();
    rec.L_size = st.pools.low_count();
    rec.l_kd = tr.kd;
    rec.l_im = tr.im;
    rec.l_mix = tr.mix;
    if (eval_labels) {
        std::size_t hits = 0, total = 0;
        for (std::size_t i = 0; i < st.pools.size(); ++i)
            if (st.pools.in_high[i]) {
                ++total;
                if (st.pools.pseudo_hard[i] == (*eval_labels)[i]) ++hits;
            }
        rec.H_purity = total ? double(hits) / double(total) : 0.0;
        rec.target_acc = evaluate(st.model_phir, target_x, *eval_labels).accuracy;
    }
    return rec;
}

}  // namespace detail

// Warm-up: gate every low-confidence sample with source predictions plus
// student prototypes, then train phi^1 on H from a copy of phi^0.
inline void warmup(RunState& st, const Matrix2D& target_x,
                   const SoftPredictionSet& src_preds, const MlpModel& student,
                   const Hyperparams& hp,
                   const std::vector<std::size_t>* eval_labels = nullptr) {
    const auto [feat, probs] = forward(student, target_x);
    const PrototypeSet protos = compute_prototypes(feat, probs);
    const SimilarityStats sim = intra_class_similarity(
        feat, st.pools.pseudo_hard, src_preds.K, hp.delta);

    st.pools.begin_round();
    const GateParams gp = hp.gate();
    for (std::size_t i : st.pools.low_indices()) {
        auto row = src_preds.probs.row(i);
        const SelectionDecision dec =
            warmup_gate(row[argmax_row(row)], st.pools.pseudo_hard[i],
                        protos.labels_refined[i], protos.margins[i], sim.ts[i], gp);
        if (dec.promote) st.pools.promote(i);
    }
    if (st.pools.high_count() == 0)
        throw StallError("warm-up selected no high-confidence samples; thresholds too strict");

    st.round = 1;
    st.model_phir = st.model_phi0;
    const detail::TrainResult tr = detail::train_distill(
        st.model_phir, target_x, st.pools.pseudo_soft, st.pools.high_indices(), hp,
        hp.loss_weights, hp.epochs_round, mix_seed(hp.seed, 0x1000 + st.round));
    st.history.push_back(detail::make_record(st, target_x, eval_labels, tr));
}

// One incremental round: relabel with the current model, gate L, refresh the
// pseudo-labels of promoted samples, retrain phi^{r+1} from phi^0 on H.
inline void incremental_round(RunState& st, const Matrix2D& target_x,
                              const Hyperparams& hp,
                              const std::vector<std::size_t>* eval_labels = nullptr) {
    st.round += 1;
    const auto [feat, probs] = forward(st.model_phir, target_x);
    const PrototypeSet protos = compute_prototypes(feat, probs);
    std::vector<std::size_t> hard(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) hard[i] = argmax_row(probs.row(i));
    const SimilarityStats sim =
        intra_class_similarity(feat, hard, probs.cols, hp.delta);

    st.pools.begin_round();
    const GateParams gp = hp.gate();
    std::size_t promotions = 0;
    for (std::size_t i : st.pools.low_indices()) {
        const SelectionDecision dec =
            incremental_gate(hard[i], protos.labels_refined[i], protos.margins[i],
                             sim.ts[i], gp, st.round);
        if (dec.promote) {
            st.pools.relabel(i, probs.row(i), hard[i]);
            st.pools.promote(i);
            ++promotions;
        }
    }
    st.stall_count = promotions == 0 ? st.stall_count + 1 : 0;

    st.model_phir = st.model_phi0;
    const detail::TrainResult tr = detail::train_distill(
        st.model_phir, target_x, st.pools.pseudo_soft, st.pools.high_indices(), hp,
        hp.loss_weights, hp.epochs_round, mix_seed(hp.seed, 0x1000 + st.round));
    st.history.push_back(detail::make_record(st, target_x, eval_labels, tr));
}

// Final fine-tune: information maximization alone over all target samples
// (the full objective on H behind the config switch).
inline detail::TrainResult finetune(RunState& st, const Matrix2D& target_x,
                                    const Hyperparams& hp) {
    if (hp.epochs_finetune == 0) return {};
    if (!hp.finetune_full_objective && hp.loss_weights.im == 0.0)
        return {};  // nothing to optimize when the IM term is disabled
    if (hp.finetune_full_objective)
        return detail::train_distill(st.model_phir, target_x, st.pools.pseudo_soft,
                                     st.pools.high_indices(), hp, hp.loss_weights,
                                     hp.epochs_finetune, mix_seed(hp.seed, 0xf17e));
    return detail::train_distill(st.model_phir, target_x, st.pools.pseudo_soft,
                                 detail::all_indices(target_x.rows), hp,
                                 LossWeights{0.0, hp.loss_weights.im, 0.0},
                                 hp.epochs_finetune,
                                 mix_seed(hp.seed, 0xf17e));
}

// Adaptation side of the pipeline. Consumes only the target inputs and the
// exported predictions; eval_labels feed metrics, never training.
inline RunResult run_adaptation(const Matrix2D& target_x,
                                const SoftPredictionSet& src_preds,
                                const Hyperparams& hp,
                                const std::vector<std::size_t>* eval_labels = nullptr) {
    hp.validate();
    require_shape(src_preds.size() == target_x.rows,
                  "run_adaptation: predictions do not cover the target set");

    RunState st;
    st.pools = ConfidencePools::init(src_preds);
    st.model_phi0 = train_crude_target(target_x, src_preds, hp);
    const MlpModel student = train_student(target_x, src_preds, hp);

    RunResult out;
    if (eval_labels) {
        out.crude_accuracy = evaluate(st.model_phi0, target_x, *eval_labels).accuracy;
        std::size_t hits = 0;
        const auto src_hard = src_preds.hard_labels();
        for (std::size_t i = 0; i < src_hard.size(); ++i)
            if (src_hard[i] == (*eval_labels)[i]) ++hits;
        out.source_pred_accuracy = double(hits) / double(src_hard.size());
    }

    warmup(st, target_x, src_preds, student, hp, eval_labels);
    out.warmup_H_purity = st.history.back().H_purity;

    const double n_t = double(target_x.rows);
    while (double(st.pools.low_count()) / n_t >= hp.lambda_stop &&
           st.round < hp.max_rounds) {
        incremental_round(st, target_x, hp, eval_labels);
        if (st.stall_count >= 2) {
            st.status = "stalled";
            break;
        }
    }
    if (st.status == "running")
        st.status = st.round >= hp.max_rounds &&
                            double(st.pools.low_count()) / n_t >= hp.lambda_stop
                        ? "max_rounds"
                        : "converged";

    const detail::TrainResult ft = finetune(st, target_x, hp);
    st.round += 1;
    st.history.push_back(detail::make_record(st, target_x, eval_labels, ft));

    out.model = std::move(st.model_phir);
    out.history = std::move(st.history);
    out.status = std::move(st.status);
    if (eval_labels)
        out.final_accuracy = evaluate(out.model, target_x, *eval_labels).accuracy;
    return out;
}

// Whole pipeline on one domain pair: source training, prediction export,
// black-box adaptation.
inline RunResult run_full(const DomainPair& dp, const Hyperparams& hp) {
    const MlpModel source = train_source(dp.source_x, dp.source_y, dp.K, hp);
    const SoftPredictionSet preds = export_predictions(source, dp.target_x);
    return run_adaptation(dp.target_x, preds, hp, &dp.eval_only_target_labels());
}

}  // namespace bbda
