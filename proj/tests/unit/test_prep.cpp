#include <doctest.h>

#include <algorithm>
#include <set>

#include "descreg/prep.hpp"
#include "oracles.hpp"

using namespace descreg;

namespace {

// Every pixel column of [0, max(L, patch)) is covered and nothing outside it is.
void check_axis_coverage(const AxisPlan& a) {
    const long extent = std::max(a.length, a.patch);
    std::vector<int> hits(static_cast<std::size_t>(extent), 0);
    for (long s : a.starts) {
        REQUIRE(s >= 0);
        REQUIRE(s + a.patch <= extent);
        for (long p = s; p < s + a.patch; ++p) ++hits[static_cast<std::size_t>(p)];
    }
    CHECK(std::count(hits.begin(), hits.end(), 0) == 0);
    CHECK(a.starts.front() == 0);
    CHECK(a.starts.back() + a.patch == extent);
    if (a.count() > 2) {
        long lo = a.starts[1] - a.starts[0], hi = lo;
        for (std::size_t i = 1; i + 1 < a.count(); ++i) {
            lo = std::min(lo, a.starts[i + 1] - a.starts[i]);
            hi = std::max(hi, a.starts[i + 1] - a.starts[i]);
        }
        CHECK(hi - lo <= 1);
    }
}

EmbeddingSet embeddings(const std::vector<std::string>& names, const Eigen::MatrixXd& v) {
    EmbeddingSet e;
    e.names = names;
    e.dim = static_cast<std::size_t>(v.cols());
    e.vectors = v;
    return e;
}

}  // namespace

TEST_CASE("2000-pixel axis") {
    const auto a = plan_axis(2000);
    CHECK(a.starts == std::vector<long>{0, 600, 1200});
    CHECK(a.overlap(0) == 200);
    CHECK(a.overlap(1) == 200);
    CHECK(a.padding() == 0);
    CHECK(nominal_overlap(2000) == 200.0);
    CHECK(3 * 800 - 2 * 200 == 2000);
    check_axis_coverage(a);
}

TEST_CASE("short axes") {
    const auto exact = plan_axis(800);
    CHECK(exact.starts == std::vector<long>{0});
    CHECK(exact.padding() == 0);
    const auto small = plan_axis(700);
    CHECK(small.starts == std::vector<long>{0});
    CHECK(small.padding() == 100);
    CHECK(nominal_overlap(700) == 0.0);
    const auto plan = crop_plan(700, 2000);
    const auto w = plan.windows();
    REQUIRE(w.size() == 3);
    CHECK(w[0].pad_x == 100);
    CHECK(w[0].width == 800);
    CHECK(w[2].y == 1200);
}

TEST_CASE("window counts and rounding") {
    CHECK(plan_axis(801).starts == std::vector<long>{0, 1});
    CHECK(plan_axis(1600).count() == 3);
    CHECK(plan_axis(1599).count() == 2);
    // Starts i * 1300 / 2 for L = 2100: 0, 650, 1300.
    CHECK(plan_axis(2100).starts == std::vector<long>{0, 650, 1300});
    // 3 windows over 2001: 0, 600.5 -> 601, 1201.
    CHECK(plan_axis(2001).starts == std::vector<long>{0, 601, 1201});
    CHECK_THROWS(plan_axis(0));
    CHECK_THROWS(plan_axis(100, 0));
}

TEST_CASE("coverage on random sizes") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const long w = 100 + static_cast<long>(rng.index(4901));
        const long h = 100 + static_cast<long>(rng.index(4901));
        const auto plan = crop_plan(w, h);
        check_axis_coverage(plan.x);
        check_axis_coverage(plan.y);
        CHECK(plan.windows().size() == plan.x.count() * plan.y.count());
    }
}

TEST_CASE("crop csv") {
    const std::string csv = format_crop_csv(crop_plan(2000, 700));
    CHECK(csv == "index,x,y,width,height,pad_x,pad_y\n"
                 "0,0,0,800,800,0,100\n"
                 "1,600,0,800,800,0,100\n"
                 "2,1200,0,800,800,0,100\n");
}

TEST_CASE("two obvious pairs") {
    Eigen::MatrixXd v(4, 2);
    v << 1, 0.05, 0.05, 1, 1, 0, 0, 1;
    const auto e = embeddings({"p", "q", "r", "s"}, v);
    const auto pairs = leaf_pairs(e);
    REQUIRE(pairs.size() == 2);
    std::set<std::set<std::size_t>> got;
    for (const auto& p : pairs) got.insert({p.a, p.b});
    CHECK(got == std::set<std::set<std::size_t>>{{0, 2}, {1, 3}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto split = cluster_split(e, 2, rng);
        REQUIRE(split.unseen.size() == 2);
        const std::set<std::string> u(split.unseen.begin(), split.unseen.end());
        CHECK((u.count("p") + u.count("r")) == 1);
        CHECK((u.count("q") + u.count("s")) == 1);
    }
    Rng rng(0);
    const auto none = cluster_split(e, 0, rng);
    CHECK(none.unseen.empty());
    CHECK(none.seen == e.names);
    CHECK_THROWS(cluster_split(e, 3, rng));
}

TEST_CASE("leaf pair distances follow average linkage") {
    Rng rng(4);
    const auto e = embeddings({"a", "b", "c", "d", "e", "f"}, oracle::random_matrix(rng, 6, 3));
    const auto pairs = leaf_pairs(e);
    REQUIRE_FALSE(pairs.empty());
    const Eigen::MatrixXd v = e.vectors;
    const auto cosd = [&](std::size_t i, std::size_t j) {
        const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
        return 1.0 - v.row(I).dot(v.row(J)) / (v.row(I).norm() * v.row(J).norm());
    };
    // The first merge of any agglomeration is the closest pair overall.
    double best = INFINITY;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j)
            if (cosd(i, j) < best) {
                best = cosd(i, j);
                bi = i;
                bj = j;
            }
    CHECK(std::min(pairs[0].a, pairs[0].b) == bi);
    CHECK(std::max(pairs[0].a, pairs[0].b) == bj);
    for (const auto& p : pairs) CHECK(p.distance == doctest::Approx(cosd(p.a, p.b)).epsilon(1e-12));
    for (std::size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i - 1].distance <= pairs[i].distance);
}

TEST_CASE("DIOR fixture pairing") {
    const auto e = load_embedding_file(std::string(DESCREG_DATA_DIR) + "/fixtures/dior_semantic.emb");
    REQUIRE(e.size() == 20);
    const auto pairs = leaf_pairs(e);
    const auto idx = *e.index_of("groundtrackfield");
    std::string partner;
    for (const auto& p : pairs) {
        if (p.a == idx) partner = e.names[p.b];
        if (p.b == idx) partner = e.names[p.a];
    }
    CHECK(partner == "stadium");
    const std::set<std::string> fields{"baseballfield", "golffield", "stadium", "tenniscourt"};
    CHECK(fields.count(partner) == 1);
}

TEST_CASE("split relatedness property") {
    const auto dior = load_embedding_file(std::string(DESCREG_DATA_DIR) + "/fixtures/dior_semantic.emb");
    Rng gen(5);
    std::vector<EmbeddingSet> sets{dior};
    for (int i = 0; i < 20; ++i) {
        // Noisy copies of 10 anchors give 20 classes with natural pairs.
        const Eigen::MatrixXd anchors = oracle::random_matrix(gen, 10, 8);
        Eigen::MatrixXd v(20, 8);
        std::vector<std::string> names;
        for (Eigen::Index k = 0; k < 20; ++k) {
            v.row(k) = anchors.row(k / 2) + oracle::random_matrix(gen, 1, 8, 0.3);
            names.push_back("c" + std::to_string(k));
        }
        sets.push_back(embeddings(names, v));
    }
    for (const auto& e : sets) {
        const Eigen::MatrixXd& v = e.vectors;
        const auto pairs = leaf_pairs(e);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            Rng rng(seed);
            const std::size_t k = std::min<std::size_t>(4, pairs.size());
            ClassSplit split;
            try {
                split = cluster_split(e, k, rng);
            } catch (const std::invalid_argument&) {
                continue;
            }
            CHECK(split.unseen.size() == k);
            const std::set<std::string> unseen(split.unseen.begin(), split.unseen.end());
            for (const auto& u : split.unseen) {
                const auto i = static_cast<Eigen::Index>(*e.index_of(u));
                Eigen::Index nn = -1;
                double best = -2.0;
                for (Eigen::Index j = 0; j < v.rows(); ++j) {
                    if (j == i) continue;
                    const double c = v.row(i).dot(v.row(j)) / (v.row(i).norm() * v.row(j).norm());
                    if (c > best) {
                        best = c;
                        nn = j;
                    }
                }
                std::string sibling;
                for (const auto& p : pairs) {
                    if (static_cast<Eigen::Index>(p.a) == i) sibling = e.names[p.b];
                    if (static_cast<Eigen::Index>(p.b) == i) sibling = e.names[p.a];
                }
                const std::string& nn_name = e.names[static_cast<std::size_t>(nn)];
                CHECK((unseen.count(nn_name) == 0 || nn_name == sibling));
            }
        }
    }
}
