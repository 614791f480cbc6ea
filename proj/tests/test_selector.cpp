#include <doctest.h>

#include "bbda/datagen.hpp"
#include "oracles.hpp"

using namespace bbda;

TEST_CASE("weighted centroids collapse to class means for one-hot weights") {
    std::mt19937_64 gen(3);
    const std::size_t n = 12, d = 4, K = 3;
    const Matrix2D f = oracle::random_matrix(n, d, gen);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % K;
    const CentroidSet c = weighted_centroids(f, one_hot(labels, K));
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> mean(d, 0.0);
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == k) {
                ++cnt;
                for (std::size_t j = 0; j < d; ++j) mean[j] += f(i, j);
            }
        for (std::size_t j = 0; j < d; ++j)
            CHECK(c.centroids(k, j) ==
                  doctest::Approx(mean[j] / double(cnt)).epsilon(1e-12));
    }
}

TEST_CASE("uniform weights give every class the global mean") {
    std::mt19937_64 gen(4);
    const Matrix2D f = oracle::random_matrix(10, 3, gen);
    const Matrix2D p(10, 4, 0.25);
    const CentroidSet c = weighted_centroids(f, p);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 10; ++i) mean += f(i, j);
        mean /= 10.0;
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(c.centroids(k, j) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("classes with no soft weight are flagged empty") {
    Matrix2D f(2, 2, 1.0);
    Matrix2D p(2, 3);
    p(0, 0) = 1.0;
    p(1, 0) = 1.0;  // classes 1 and 2 get nothing
    const CentroidSet c = weighted_centroids(f, p);
    CHECK_FALSE(c.empty[0]);
    CHECK(c.empty[1]);
    CHECK(c.empty[2]);
}

TEST_CASE("assign_nearest basics: exact match, tie break, zero norm") {
    Matrix2D centroids(2, 2);
    centroids(0, 0) = 1.0;
    centroids(1, 1) = 1.0;
    Matrix2D f(3, 2);
    f(0, 0) = 2.0;                  // same direction as centroid 0
    f(1, 0) = 1.0;
    f(1, 1) = 1.0;                  // equidistant: lower index wins
    /* f row 2 is the zero vector */
    const Assignment a = assign_nearest(f, centroids);
    CHECK(a.labels[0] == 0);
    CHECK(a.distances(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a.labels[1] == 0);
    CHECK(a.labels[2] == 0);
    CHECK(a.distances(2, 0) == 1.0);
    CHECK(a.distances(2, 1) == 1.0);
}

TEST_CASE("assign_nearest is invariant to positive per-sample scaling") {
    std::mt19937_64 gen(7);
    const Matrix2D f = oracle::random_matrix(30, 5, gen);
    const Matrix2D c = oracle::random_matrix(4, 5, gen);
    Matrix2D scaled = f;
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (std::size_t i = 0; i < scaled.rows; ++i) {
        const double s = u(gen);
        for (std::size_t j = 0; j < scaled.cols; ++j) scaled(i, j) *= s;
    }
    CHECK(assign_nearest(f, c).labels == assign_nearest(scaled, c).labels);
}

TEST_CASE("refinement is a fixed point on converged clusterings") {
    // two tight blobs around orthogonal directions
    Matrix2D f(6, 2);
    for (int i = 0; i < 3; ++i) {
        f(i, 0) = 1.0;
        f(i, 1) = 0.01 * i;
        f(i + 3, 1) = 1.0;
        f(i + 3, 0) = 0.01 * i;
    }
    Matrix2D c0(2, 2);
    c0(0, 0) = 1.0;
    c0(1, 1) = 1.0;
    const Assignment a = assign_nearest(f, c0);
    const Refined r = refine_prototypes(f, a.labels, c0);
    CHECK(r.labels == a.labels);
    CHECK(r.labels == std::vector<std::size_t>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("refinement keeps the fallback centroid for emptied classes") {
    Matrix2D f(2, 2);
    f(0, 0) = 1.0;
    f(1, 0) = 1.0;
    Matrix2D c0(2, 2);
    c0(0, 0) = 1.0;
    c0(1, 0) = -1.0;
    const Refined r = refine_prototypes(f, {0, 0}, c0);
    CHECK(r.centroids(1, 0) == -1.0);
}

TEST_CASE("distance margin closed forms") {
    Matrix2D d(3, 3, 0.9);
    d(0, 0) = 0.2;
    d(0, 1) = 0.4;
    d(1, 0) = 0.3;
    d(1, 1) = 0.3;
    d(2, 0) = 0.1;
    d(2, 1) = 0.5;
    d(2, 2) = 0.7;
    const auto m = distance_margins(d);
    CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m[2] == doctest::Approx(4.0).epsilon(1e-12));

    Matrix2D two(1, 2);
    two(0, 0) = 0.1;
    two(0, 1) = 0.5;
    CHECK(distance_margins(two)[0] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("zero minimum distance maps to the sentinel margin") {
    Matrix2D d(1, 2);
    d(0, 0) = 0.0;
    d(0, 1) = 0.3;
    CHECK(distance_margins(d)[0] == kMarginSentinel);
}

TEST_CASE("intra-class similarity closed forms") {
    SUBCASE("identical vectors all score 1") {
        Matrix2D f(4, 3);
        for (std::size_t i = 0; i < 4; ++i) f(i, 1) = 2.0;
        const auto s = intra_class_similarity(f, {0, 0, 0, 0}, 1, 0.99);
        for (double v : s.ts) CHECK(v == 1.0);
    }
    SUBCASE("singleton classes score 1") {
        Matrix2D f(2, 2);
        f(0, 0) = 1.0;
        f(1, 1) = 1.0;
        const auto s = intra_class_similarity(f, {0, 1}, 2, 0.6);
        CHECK(s.ts == std::vector<double>{1.0, 1.0});
        CHECK(s.class_sizes == std::vector<std::size_t>{1, 1});
    }
    SUBCASE("orthogonal 3-member class: e1, e1, e2") {
        Matrix2D f(3, 2);
        f(0, 0) = 1.0;
        f(1, 0) = 1.0;
        f(2, 1) = 1.0;
        const auto s = intra_class_similarity(f, {0, 0, 0}, 1, 0.6);
        CHECK(s.ts[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(s.ts[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(s.ts[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
}

TEST_CASE("ts is monotone non-increasing in delta") {
    std::mt19937_64 gen(11);
    const Matrix2D f = oracle::random_matrix(40, 6, gen);
    std::vector<std::size_t> labels(40);
    for (auto& l : labels) l = gen() % 3;
    std::vector<double> prev(40, 2.0);
    for (double delta : {-0.5, 0.0, 0.3, 0.6, 0.9}) {
        const auto s = intra_class_similarity(f, labels, 3, delta);
        for (std::size_t i = 0; i < 40; ++i) {
            CHECK(s.ts[i] <= prev[i]);
            CHECK(s.ts[i] >= 0.0);
            CHECK(s.ts[i] <= 1.0);
        }
        prev = s.ts;
    }
}

TEST_CASE("selector operations match naive oracles on random instances") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 20 + gen() % 60, d = 3 + gen() % 5, K = 2 + gen() % 5;
        const Matrix2D f = oracle::random_matrix(n, d, gen);
        const Matrix2D p = oracle::random_stochastic(n, K, gen);

        const CentroidSet c = weighted_centroids(f, p);
        const Matrix2D c_ref = oracle::centroids(f, p);
        for (std::size_t k = 0; k < c.centroids.data.size(); ++k)
            CHECK(std::abs(c.centroids.data[k] - c_ref.data[k]) < 1e-10);

        const Assignment a = assign_nearest(f, c.centroids);
        CHECK(a.labels == oracle::nearest(f, c.centroids));

        const Refined r = refine_prototypes(f, a.labels, c.centroids);
        CHECK(r.labels == oracle::nearest(f, r.centroids));

        const double delta = -0.2 + 0.1 * double(trial % 10);
        const auto s = intra_class_similarity(f, a.labels, K, delta);
        const auto s_ref = oracle::similarity_scores(f, a.labels, K, delta);
        CHECK(s.ts == s_ref);
    }
}

TEST_CASE("permuting samples permutes selector outputs identically") {
    std::mt19937_64 gen(17);
    const std::size_t n = 30, d = 4, K = 3;
    const Matrix2D f = oracle::random_matrix(n, d, gen);
    const Matrix2D p = oracle::random_stochastic(n, K, gen);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    const Matrix2D fp = gather_rows(f, perm);
    const Matrix2D pp = gather_rows(p, perm);

    const PrototypeSet orig = compute_prototypes(f, p);
    const PrototypeSet shuf = compute_prototypes(fp, pp);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(shuf.labels_refined[i] == orig.labels_refined[perm[i]]);
        CHECK(shuf.margins[i] == doctest::Approx(orig.margins[perm[i]]).epsilon(1e-12));
    }
    const auto s = intra_class_similarity(f, orig.labels_refined, K, 0.6);
    std::vector<std::size_t> labels_p(n);
    for (std::size_t i = 0; i < n; ++i) labels_p[i] = orig.labels_refined[perm[i]];
    const auto sp = intra_class_similarity(fp, labels_p, K, 0.6);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(sp.ts[i] == doctest::Approx(s.ts[perm[i]]).epsilon(1e-12));
}

TEST_CASE("warm-up gate clauses") {
    const GateParams gp{0.8, 0.3, 0.3, 0.05, 0.9};
    // alpha clause satisfied, similarity ok
    CHECK(warmup_gate(0.95, 1, 0, 0.0, 0.5, gp).promote);
    // neither clause: low prob, proto mismatch
    {
        const auto d = warmup_gate(0.5, 1, 0, 2.0, 0.9, gp);
        CHECK_FALSE(d.promote);
        CHECK(d.reason == GateReason::confidence_clause_failed);
    }
    // proto clause holds but similarity fails
    {
        const auto d = warmup_gate(0.5, 1, 1, 0.4, 0.2, gp);
        CHECK_FALSE(d.promote);
        CHECK(d.reason == GateReason::similarity_below_theta);
    }
    // proto match with margin below beta and low prob
    CHECK_FALSE(warmup_gate(0.5, 1, 1, 0.2, 0.9, gp).promote);
}

TEST_CASE("incremental gate clauses and tightening schedule") {
    const GateParams gp{0.8, 0.3, 0.3, 0.05, 0.9};
    CHECK(incremental_gate(2, 2, 1.0, 0.9, gp, 2).promote);
    // ts exactly at threshold rejects (strict inequality)
    CHECK_FALSE(incremental_gate(2, 2, 1.0, tightened_theta(gp, 2), gp, 2).promote);
    // inconsistent labels reject regardless of ts
    {
        const auto d = incremental_gate(1, 2, 1.0, 1.0, gp, 2);
        CHECK_FALSE(d.promote);
        CHECK(d.reason == GateReason::proto_label_mismatch);
    }
    // margin below beta rejects
    CHECK(incremental_gate(2, 2, 0.2, 1.0, gp, 2).reason ==
          GateReason::margin_below_beta);
    // schedule: theta + 0.05*(r-1), capped at 0.9
    CHECK(tightened_theta(gp, 1) == doctest::Approx(0.3));
    CHECK(tightened_theta(gp, 5) == doctest::Approx(0.5));
    CHECK(tightened_theta(gp, 50) == doctest::Approx(0.9));
}

TEST_CASE("gates are pure: same inputs, same decision") {
    const GateParams gp{0.7, 0.2, 0.3, 0.05, 0.9};
    std::mt19937_64 gen(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const double prob = u(gen), dt = 3.0 * u(gen), ts = u(gen);
        const std::size_t hs = gen() % 4, pl = gen() % 4, r = 2 + gen() % 5;
        const auto a = warmup_gate(prob, hs, pl, dt, ts, gp);
        const auto b = warmup_gate(prob, hs, pl, dt, ts, gp);
        CHECK(a.promote == b.promote);
        CHECK(a.reason == b.reason);
        const auto c = incremental_gate(hs, pl, dt, ts, gp, r);
        const auto d = incremental_gate(hs, pl, dt, ts, gp, r);
        CHECK(c.promote == d.promote);
        CHECK(c.reason == d.reason);
    }
}
