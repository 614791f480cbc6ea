#pragma once

#include "bbda/matrix.hpp"

namespace bbda {

// Sentinel margin for samples sitting exactly on a centroid (min distance 0).
inline constexpr double kMarginSentinel = 1e12;

struct CentroidSet {
    Matrix2D centroids;  // K x d
    std::vector<bool> empty;
};

// c_k = sum_i p_ik g_i / sum_i p_ik. Classes with total soft weight below
// 1e-9 are flagged empty and left at zero.
inline CentroidSet weighted_centroids(const Matrix2D& features, const Matrix2D& probs) {
    require_shape(features.rows == probs.rows,
                  "weighted_centroids: features/probs row mismatch");
    const std::size_t K = probs.cols, d = features.cols;
    CentroidSet out;
    out.centroids = Matrix2D(K, d);
    out.empty.assign(K, false);
    for (std::size_t k = 0; k < K; ++k) {
        double wsum = 0.0;
        for (std::size_t i = 0; i < features.rows; ++i) {
            const double w = probs(i, k);
            wsum += w;
            for (std::size_t j = 0; j < d; ++j)
                out.centroids(k, j) += w * features(i, j);
        }
        if (wsum < 1e-9) {
            out.empty[k] = true;
            for (std::size_t j = 0; j < d; ++j) out.centroids(k, j) = 0.0;
        } else {
            for (std::size_t j = 0; j < d; ++j) out.centroids(k, j) /= wsum;
        }
    }
    return out;
}

struct Assignment {
    std::vector<std::size_t> labels;
    Matrix2D distances;  // n x K cosine distances
};

// Nearest centroid by cosine distance; ties go to the lowest class index.
inline Assignment assign_nearest(const Matrix2D& features, const Matrix2D& centroids) {
    require_shape(features.cols == centroids.cols,
                  "assign_nearest: feature dim != centroid dim");
    Assignment out;
    out.distances = Matrix2D(features.rows, centroids.rows);
    out.labels.resize(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 0; k < centroids.rows; ++k) {
            const double dist = cosine_distance(features.row(i), centroids.row(k));
            out.distances(i, k) = dist;
            if (dist < out.distances(i, best)) best = k;
        }
        out.labels[i] = best;
    }
    return out;
}

struct Refined {
    Matrix2D centroids;  // K x d, unweighted class means
    std::vector<std::size_t> labels;
    Matrix2D distances;
};

// One refinement round: unweighted means of the assigned classes, then
// reassign. Classes that lost all members keep their fallback centroid.
inline Refined refine_prototypes(const Matrix2D& features,
                                 const std::vector<std::size_t>& labels_initial,
                                 const Matrix2D& fallback_centroids) {
    require_shape(features.rows == labels_initial.size(),
                  "refine_prototypes: label count mismatch");
    const std::size_t K = fallback_centroids.rows, d = features.cols;
    Matrix2D c1(K, d);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const std::size_t k = labels_initial[i];
        if (k >= K) throw ValidationError("refine_prototypes: label out of range");
        ++counts[k];
        for (std::size_t j = 0; j < d; ++j) c1(k, j) += features(i, j);
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (counts[k] == 0) {
            for (std::size_t j = 0; j < d; ++j) c1(k, j) = fallback_centroids(k, j);
        } else {
            for (std::size_t j = 0; j < d; ++j) c1(k, j) /= double(counts[k]);
        }
    }
    Assignment a = assign_nearest(features, c1);
    return {std::move(c1), std::move(a.labels), std::move(a.distances)};
}

// d_t = (2ndmin - min) / min per row; min distance 0 maps to the sentinel.
inline std::vector<double> distance_margins(const Matrix2D& distances) {
    if (distances.cols < 2)
        throw ValidationError("distance_margins: need at least 2 centroids");
    std::vector<double> out(distances.rows);
    for (std::size_t i = 0; i < distances.rows; ++i) {
        double lo = distances(i, 0), lo2 = distances(i, 1);
        if (lo2 < lo) std::swap(lo, lo2);
        for (std::size_t k = 2; k < distances.cols; ++k) {
            const double dist = distances(i, k);
            if (dist < lo) {
                lo2 = lo;
                lo = dist;
            } else if (dist < lo2) {
                lo2 = dist;
            }
        }
        out[i] = lo <= 0.0 ? kMarginSentinel : (lo2 - lo) / lo;
    }
    return out;
}

// Eqs. 3-6 chained: weighted centroids, nearest assignment, one refinement
// round, per-sample margins against the refined centroids.
struct PrototypeSet {
    Matrix2D centroids_c0;
    Matrix2D centroids_c1;
    std::vector<std::size_t> labels_initial;
    std::vector<std::size_t> labels_refined;
    std::vector<double> margins;
};

inline PrototypeSet compute_prototypes(const Matrix2D& features, const Matrix2D& probs) {
    CentroidSet c0 = weighted_centroids(features, probs);
    Assignment a0 = assign_nearest(features, c0.centroids);
    Refined r = refine_prototypes(features, a0.labels, c0.centroids);
    PrototypeSet out;
    out.centroids_c0 = std::move(c0.centroids);
    out.centroids_c1 = std::move(r.centroids);
    out.labels_initial = std::move(a0.labels);
    out.labels_refined = std::move(r.labels);
    out.margins = distance_margins(r.distances);
    return out;
}

struct SimilarityStats {
    std::vector<double> ts;               // per sample, in [0,1]
    std::vector<std::size_t> class_sizes;  // n^k per class
};

// Per class k: S_ij = cosine similarity, M_ij = 1 if S_ij > delta,
// ts_i = sum_j M_ij / n^k with j over all members of k including i.
// Zero-norm features get similarity 0 to everything, themselves included.
inline SimilarityStats intra_class_similarity(const Matrix2D& features,
                                              const std::vector<std::size_t>& labels,
                                              std::size_t K, double delta) {
    if (delta < -1.0 || delta > 1.0)
        throw ValidationError("intra_class_similarity: delta outside [-1,1]");
    require_shape(features.rows == labels.size(),
                  "intra_class_similarity: label count mismatch");
    const std::size_t n = features.rows, d = features.cols;

    Matrix2D unit(n, d);
    std::vector<bool> zero_norm(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const double norm = l2_norm(features.row(i));
        if (norm <= 0.0) {
            zero_norm[i] = true;
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) unit(i, j) = features(i, j) / norm;
    }

    std::vector<std::vector<std::size_t>> members(K);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= K) throw ValidationError("intra_class_similarity: label out of range");
        members[labels[i]].push_back(i);
    }

    SimilarityStats out;
    out.ts.assign(n, 0.0);
    out.class_sizes.assign(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& idx = members[k];
        out.class_sizes[k] = idx.size();
        for (std::size_t a = 0; a < idx.size(); ++a) {
            std::size_t hits = 0;
            for (std::size_t b = 0; b < idx.size(); ++b) {
                double s = 0.0;
                if (!zero_norm[idx[a]] && !zero_norm[idx[b]])
                    s = dot(unit.row(idx[a]), unit.row(idx[b]));
                if (s > delta) ++hits;
            }
            out.ts[idx[a]] = double(hits) / double(idx.size());
        }
    }
    return out;
}

enum class GateReason {
    promoted,
    confidence_clause_failed,  // warm-up: neither proto clause nor alpha clause held
    proto_label_mismatch,
    margin_below_beta,
    similarity_below_theta,
};

struct SelectionDecision {
    bool promote = false;
    GateReason reason = GateReason::promoted;
};

struct GateParams {
    double alpha = 0.8;
    double beta = 0.3;
    double theta = 0.3;
    double theta_step = 0.05;  // per-round tightening of the similarity threshold
    double theta_cap = 0.9;
};

inline double tightened_theta(const GateParams& gp, std::size_t round) {
    const double t = gp.theta + gp.theta_step * double(round - 1);
    return std::min(t, gp.theta_cap);
}

// Warm-up: promote iff [(proto == src hard and d_t > beta) or max src prob > alpha]
// and ts > theta.
inline SelectionDecision warmup_gate(double max_src_prob, std::size_t hard_src,
                                     std::size_t proto_label, double d_t, double ts,
                                     const GateParams& gp) {
    const bool proto_ok = proto_label == hard_src && d_t > gp.beta;
    const bool prob_ok = max_src_prob > gp.alpha;
    if (!proto_ok && !prob_ok) return {false, GateReason::confidence_clause_failed};
    if (!(ts > gp.theta)) return {false, GateReason::similarity_below_theta};
    return {true, GateReason::promoted};
}

// Incremental round r: promote iff proto label matches the current model's
// hard label, d_t > beta, and ts clears the tightened threshold.
inline SelectionDecision incremental_gate(std::size_t hard_target,
                                          std::size_t proto_label, double d_t,
                                          double ts, const GateParams& gp,
                                          std::size_t round) {
    if (proto_label != hard_target) return {false, GateReason::proto_label_mismatch};
    if (!(d_t > gp.beta)) return {false, GateReason::margin_below_beta};
    if (!(ts > tightened_theta(gp, round)))
        return {false, GateReason::similarity_below_theta};
    return {true, GateReason::promoted};
}

}  // namespace bbda
