#include <doctest.h>

#include <cmath>

#include "descreg/regularizer.hpp"
#include "oracles.hpp"

using namespace descreg;

namespace {

SimilarityMatrix from_normalized(const Eigen::MatrixXd& normalized) {
    SimilarityMatrix s;
    s.raw = normalized;
    s.normalized = normalized;
    return s;
}

SimilarityMatrix random_similarity(Rng& rng, std::size_t n, double tau = 0.03) {
    SimilarityMatrix s;
    s.raw = cosine_matrix(oracle::random_matrix(rng, n, 6));
    s.normalized = self_excluding_softmax(s.raw, tau);
    s.tau = tau;
    return s;
}

// Smallest |d(a,p) - d(a,n) + margin| over the triplets.
double kink_distance(const Eigen::MatrixXd& w, const std::vector<TripletSample>& ts) {
    double best = INFINITY;
    for (const auto& t : ts) {
        const double h = oracle::distance(w, t.anchor, t.positive) - oracle::distance(w, t.anchor, t.negative) + t.margin;
        best = std::min(best, std::abs(h));
    }
    return best;
}

}  // namespace

TEST_CASE("default pool sizes") {
    CHECK(SamplingPolicy::defaults(20).pos_pool == 5);
    CHECK(SamplingPolicy::defaults(20).neg_pool == 10);
    CHECK(SamplingPolicy::defaults(3).pos_pool == 1);
    CHECK(SamplingPolicy::defaults(3).neg_pool == 1);
    CHECK(SamplingPolicy::defaults(6).pos_pool == 2);
    CHECK(SamplingPolicy::defaults(6).neg_pool == 3);
}

TEST_CASE("pools of one force the extremes") {
    Eigen::MatrixXd s(4, 4);
    s << 1, 0.7, 0.2, 0.1,
         0.5, 1, 0.25, 0.25,
         0.4, 0.3, 1, 0.3,
         0.2, 0.3, 0.5, 1;
    TripletConfig cfg;
    cfg.policy.pos_pool = 1;
    cfg.policy.neg_pool = 1;
    Rng rng(0);
    for (int i = 0; i < 20; ++i) {
        const auto t = sample_triplet(0, from_normalized(s), cfg, rng);
        CHECK(t.positive == 1);
        CHECK(t.negative == 3);
        CHECK(std::abs(t.margin - 0.6) < 1e-15);
    }
    cfg.margin = MarginMode::Fixed;
    CHECK(sample_triplet(0, from_normalized(s), cfg, rng).margin == 0.2);
}

TEST_CASE("diagonal mode uses the anchor as its own positive") {
    const auto d = diagonal_matrix(5);
    TripletConfig cfg;
    cfg.policy = SamplingPolicy::defaults(5);
    Rng rng(4);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 200; ++i) {
        const auto t = sample_triplet(2, d, cfg, rng);
        CHECK(t.positive == 2);
        CHECK(t.negative != 2);
        CHECK(t.margin == 1.0);
        ++hits[t.negative];
    }
    for (std::size_t k : {0u, 1u, 3u, 4u}) CHECK(hits[k] > 0);
}

TEST_CASE("tied similarities pool by index") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(5, 5, 0.25);
    s.diagonal().setOnes();
    TripletConfig cfg;
    cfg.policy.pos_pool = 1;
    cfg.policy.neg_pool = 1;
    Rng rng(1);
    const auto t = sample_triplet(0, from_normalized(s), cfg, rng);
    CHECK(t.positive == 1);
    CHECK(t.negative == 4);
    CHECK(t.margin == 0.0);
}

TEST_CASE("sampled positives are at least as similar as negatives") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.index(10);
        const auto sim = random_similarity(rng, n);
        for (SamplingMode mode : {SamplingMode::TopPool, SamplingMode::Proportional}) {
            TripletConfig cfg;
            cfg.policy = SamplingPolicy::defaults(n);
            cfg.policy.mode = mode;
            cfg.policy.triplets_per_class = 3;
            for (const auto& t : sample_triplets(sim, cfg, rng)) {
                CHECK(t.positive != t.anchor);
                CHECK(t.negative != t.anchor);
                CHECK(t.margin >= 0.0);
                if (mode == SamplingMode::TopPool) CHECK(t.margin > 0.0);
            }
        }
    }
}

TEST_CASE("hinge examples") {
    Eigen::MatrixXd w(3, 1);
    w << 0, 1, 2;
    auto v = triplet_loss(w, {0, 1, 2, 0.5});
    CHECK(v.value == 0.0);
    CHECK(v.grad.isZero(0.0));
    v = triplet_loss(w, {0, 2, 1, 0.5});
    CHECK(v.value == 1.5);
    // Active hinge is (w2 - w0) - (w1 - w0) + 0.5.
    CHECK(v.grad(0, 0) == 0.0);
    CHECK(v.grad(1, 0) == -1.0);
    CHECK(v.grad(2, 0) == 1.0);
}

TEST_CASE("triplet gradient matches finite differences") {
    Rng rng(21);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng.index(8);
        const std::size_t dim = 1 + rng.index(16);
        const auto sim = random_similarity(rng, n, trial % 2 ? 0.03 : 1.0);
        TripletConfig cfg;
        cfg.policy = SamplingPolicy::defaults(n);
        cfg.policy.triplets_per_class = 1 + rng.index(2);
        const Eigen::MatrixXd w = oracle::random_matrix(rng, n, dim);
        const Rng frozen = rng;
        Rng draw = frozen;
        std::vector<TripletSample> ts;
        const auto value = triplet_loss_total(w, sim, cfg, draw, &ts);
        if (kink_distance(w, ts) < 1e-4) continue;
        const auto f = [&](const Eigen::VectorXd& x) {
            Rng again = frozen;
            return triplet_loss_total(oracle::unflatten(x, w.rows(), w.cols()), sim, cfg, again).value;
        };
        const Eigen::VectorXd num = oracle::numeric_gradient(f, oracle::flatten(w));
        CHECK(oracle::relative_error(oracle::flatten(value.grad), num) < 1e-5);
        rng = draw;
        ++checked;
    }
    CHECK(checked > 80);
}

TEST_CASE("total is the sum of per-anchor losses") {
    Rng rng(12);
    const auto sim = random_similarity(rng, 4);
    TripletConfig cfg;
    const Eigen::MatrixXd w = oracle::random_matrix(rng, 4, 5, 0.3);
    Rng a(77), b(77);
    const double total = triplet_loss_total(w, sim, cfg, a).value;
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        const auto t = sample_triplet(j, sim, cfg, b);
        const double h = oracle::distance(w, j, t.positive) - oracle::distance(w, j, t.negative) + t.margin;
        sum += std::max(0.0, h);
    }
    CHECK(total == doctest::Approx(sum).epsilon(1e-14));
}

TEST_CASE("anchors beyond anchor_count are skipped") {
    Rng rng(13);
    const auto sim = random_similarity(rng, 6);
    TripletConfig cfg;
    cfg.policy = SamplingPolicy::defaults(6);
    cfg.anchor_count = 4;
    Rng r(1);
    const auto ts = sample_triplets(sim, cfg, r);
    REQUIRE(ts.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ts[i].anchor == i);
}

TEST_CASE("hinge activity follows row ordering") {
    Eigen::MatrixXd s(3, 3);
    s << 1, 0.9, 0.1, 0.9, 1, 0.1, 0.5, 0.5, 1;
    TripletConfig cfg;
    cfg.policy.pos_pool = 1;
    cfg.policy.neg_pool = 1;
    cfg.margin = MarginMode::Fixed;
    cfg.fixed_margin = 0.0;
    Eigen::MatrixXd spread(3, 2);
    spread << 0, 0, 1, 0, 10, 0;
    Rng rng(3);
    // Anchor 0: p=1 (d=1), n=2 (d=10). Anchor 1: p=0 (d=1), n=2 (d=9).
    // Anchor 2 ties 0 and 1; the tie keeps index order, so p=0 (d=10), n=1 (d=9): active.
    const auto v = triplet_loss_total(spread, from_normalized(s), cfg, rng);
    CHECK(v.value == doctest::Approx(1.0));
    s(2, 0) = 0.1;
    s(2, 1) = 0.9;
    Rng rng2(3);
    CHECK(triplet_loss_total(spread, from_normalized(s), cfg, rng2).value == 0.0);
}

TEST_CASE("contrastive reduction under the diagonal pattern") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng.index(6);
        const Eigen::MatrixXd w = oracle::random_matrix(rng, n, 1 + rng.index(5), 0.4);
        TripletConfig cfg;
        cfg.policy = SamplingPolicy::defaults(n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto t = sample_triplet(j, diagonal_matrix(n), cfg, rng);
            CHECK(triplet_loss(w, t).value == std::max(0.0, 1.0 - oracle::distance(w, j, t.negative)));
        }
    }
}

TEST_CASE("direct similarity regularizer examples") {
    Rng rng(41);
    const Eigen::MatrixXd w = oracle::random_matrix(rng, 4, 3);
    SimilarityMatrix exact = from_normalized(cosine_matrix(w));
    CHECK(direct_similarity_reg(w, exact).value < 1e-28);

    Eigen::MatrixXd same(2, 2);
    same << 1, 2, 2, 4;
    Eigen::MatrixXd zero = Eigen::MatrixXd::Identity(2, 2);
    CHECK(direct_similarity_reg(same, from_normalized(zero)).value == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("direct similarity gradient matches finite differences") {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.index(9);
        const Eigen::MatrixXd w = oracle::random_matrix(rng, n, 1 + rng.index(16));
        const auto sim = random_similarity(rng, n);
        const auto v = direct_similarity_reg(w, sim);
        const auto f = [&](const Eigen::VectorXd& x) {
            return direct_similarity_reg(oracle::unflatten(x, w.rows(), w.cols()), sim).value;
        };
        CHECK(oracle::relative_error(oracle::flatten(v.grad), oracle::numeric_gradient(f, oracle::flatten(w))) < 1e-5);
    }
}

TEST_CASE("direct similarity value matches its definition") {
    Rng rng(44);
    const Eigen::MatrixXd w = oracle::random_matrix(rng, 5, 4);
    const auto sim = random_similarity(rng, 5);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < 5; ++j)
        for (Eigen::Index k = 0; k < 5; ++k) {
            if (j == k) continue;
            const double c = w.row(j).dot(w.row(k)) / (w.row(j).norm() * w.row(k).norm());
            sum += (c - sim.normalized(j, k)) * (c - sim.normalized(j, k));
        }
    CHECK(direct_similarity_reg(w, sim).value == doctest::Approx(sum / 20.0).epsilon(1e-13));
}

TEST_CASE("sampling and loss are deterministic") {
    Rng rng(50);
    const auto sim = random_similarity(rng, 8);
    const Eigen::MatrixXd w = oracle::random_matrix(rng, 8, 4);
    TripletConfig cfg;
    cfg.policy = SamplingPolicy::defaults(8);
    Rng a(mix_seed(3, 3)), b(mix_seed(3, 3));
    std::vector<TripletSample> ta, tb;
    const auto va = triplet_loss_total(w, sim, cfg, a, &ta);
    const auto vb = triplet_loss_total(w, sim, cfg, b, &tb);
    CHECK(va.value == vb.value);
    CHECK(va.grad == vb.grad);
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].positive == tb[i].positive);
        CHECK(ta[i].negative == tb[i].negative);
    }
}

TEST_CASE("invalid pools are rejected") {
    Rng rng(1);
    const auto sim = random_similarity(rng, 4);
    TripletConfig cfg;
    cfg.policy.pos_pool = 2;
    cfg.policy.neg_pool = 2;
    CHECK_THROWS(sample_triplet(0, sim, cfg, rng));
    cfg.policy.pos_pool = 0;
    CHECK_THROWS(sample_triplet(0, sim, cfg, rng));
}
