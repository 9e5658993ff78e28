#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "descreg/simdata.hpp"
#include "descreg/similarity.hpp"
#include "descreg/textio.hpp"
#include "oracles.hpp"

using namespace descreg;
namespace fs = std::filesystem;

namespace {

double pearson_upper(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::Index n = a.rows();
    Eigen::VectorXd x(n * (n - 1) / 2), y(n * (n - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j, ++k) {
            x(k) = a(i, j);
            y(k) = b(i, j);
        }
    x.array() -= x.mean();
    y.array() -= y.mean();
    return x.dot(y) / (x.norm() * y.norm());
}

ScenarioConfig small(std::uint64_t seed = 0) {
    ScenarioConfig c;
    c.regions_per_class = 40;
    c.images = 80;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("identity target gives orthonormal prototypes") {
    Rng rng(1);
    const Eigen::MatrixXd p = plant_prototypes(Eigen::MatrixXd::Identity(6, 6), 10, rng);
    CHECK(p.rows() == 6);
    CHECK(p.cols() == 10);
    const Eigen::MatrixXd g = p * p.transpose();
    CHECK((g - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("all-ones target gives one direction") {
    Rng rng(2);
    const Eigen::MatrixXd p = plant_prototypes(Eigen::MatrixXd::Ones(5, 5), 8, rng);
    const Eigen::MatrixXd c = cosine_matrix(p);
    CHECK((c.cwiseAbs() - Eigen::MatrixXd::Ones(5, 5)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("random PSD target is reproduced") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.index(10);
        const Eigen::MatrixXd target = cosine_matrix(oracle::random_matrix(rng, n, n));
        const Eigen::MatrixXd p = plant_prototypes(target, 2 * n, rng);
        CHECK((p.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK((p * p.transpose() - target).cwiseAbs().maxCoeff() < 5e-2);
    }
}

TEST_CASE("grouped similarity layout") {
    ScenarioConfig c;
    Rng rng(4);
    const Eigen::MatrixXd s = grouped_similarity(c, rng);
    const auto groups = group_assignment(c);
    REQUIRE(groups.size() == 20);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    for (std::size_t u = 16; u < 20; ++u) CHECK(groups[u] == u - 16);
    // Every unseen class has seen relatives in its group.
    for (std::size_t u = 16; u < 20; ++u) {
        int mates = 0;
        for (std::size_t k = 0; k < 16; ++k) mates += groups[k] == groups[u];
        CHECK(mates == 4);
    }
}

TEST_CASE("default scenario") {
    const auto data = generate_dataset(ScenarioConfig{});
    const auto& cat = data.catalog;
    REQUIRE(cat.size() == 20);
    CHECK(cat.n_seen() == 16);
    CHECK(data.train.dim == 64);

    SUBCASE("nearest-prototype classification of seen test regions") {
        std::size_t total = 0, right = 0;
        for (const auto& r : data.test.regions) {
            const auto idx = cat.index_of(r.label);
            if (!idx || !cat.is_seen(*idx)) continue;
            Eigen::Index best = 0;
            (data.prototypes.topRows(16).rowwise() - r.feature.transpose()).rowwise().squaredNorm().minCoeff(&best);
            right += static_cast<std::size_t>(best) == *idx;
            ++total;
        }
        CHECK(total == 16 * 50);
        CHECK(static_cast<double>(right) / static_cast<double>(total) > 0.95);
    }
    SUBCASE("unseen classes only appear in the test partition") {
        std::map<std::string, std::size_t> count;
        for (const auto& r : data.train.regions) {
            if (r.is_background()) continue;
            CHECK(cat.is_seen(*cat.index_of(r.label)));
            ++count[r.label];
        }
        CHECK(count.size() == 16);
        for (const auto& [name, k] : count) CHECK(k == 150);
    }
    SUBCASE("some test images hold only unseen objects") {
        std::map<std::string, std::set<bool>> kinds;
        for (const auto& g : data.test_gt) kinds[g.image_id].insert(cat.is_seen(*cat.index_of(g.class_name)));
        std::size_t unseen_only = 0, mixed = 0;
        for (const auto& [img, k] : kinds) {
            unseen_only += k == std::set<bool>{false};
            mixed += k.size() == 2;
        }
        CHECK(unseen_only > 0);
        CHECK(mixed > 0);
    }
    SUBCASE("every object region has a ground truth box") {
        std::size_t objects = 0, background = 0;
        for (const auto& r : data.test.regions) (r.is_background() ? background : objects)++;
        CHECK(objects == data.test_gt.size());
        CHECK(background > 0);
    }
    SUBCASE("semantic embeddings carry no visual structure; descriptions do") {
        const Eigen::MatrixXd proto = cosine_matrix(data.prototypes);
        CHECK(pearson_upper(cosine_matrix(cat.semantic.vectors), proto) < 0.3);
        CHECK(pearson_upper(cosine_matrix(cat.descriptions.vectors), proto) > 0.9);
        CHECK(pearson_upper(proto, data.description_sim) > 0.99);
        CHECK(offdiag_correlation(proto, data.description_sim) == doctest::Approx(pearson_upper(proto, data.description_sim)));
    }
}

TEST_CASE("zero noise puts features on their prototypes") {
    ScenarioConfig c = small();
    c.noise_sigma = 0.0;
    const auto data = generate_dataset(c);
    for (const auto& r : data.train.regions) {
        if (r.is_background()) continue;
        const auto idx = static_cast<Eigen::Index>(*data.catalog.index_of(r.label));
        CHECK(r.feature == data.prototypes.row(idx).transpose());
    }
}

TEST_CASE("same seed writes byte-identical files") {
    const fs::path root = fs::temp_directory_path() / "descreg-simdata-test";
    fs::remove_all(root);
    save_dataset(generate_dataset(small(7)), (root / "a").string());
    save_dataset(generate_dataset(small(7)), (root / "b").string());
    save_dataset(generate_dataset(small(8)), (root / "c").string());
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        const auto name = entry.path().filename();
        CHECK(textio::read_file(entry.path().string()) == textio::read_file((root / "b" / name).string()));
        ++files;
    }
    CHECK(files == 6);
    CHECK(textio::read_file((root / "a" / kTrainRegionsFile).string()) !=
          textio::read_file((root / "c" / kTrainRegionsFile).string()));
    fs::remove_all(root);
}

TEST_CASE("invalid fractions are rejected") {
    ScenarioConfig c = small();
    c.background_fraction = 1.0;
    CHECK_THROWS(generate_dataset(c));
    c = small();
    c.test_fraction = 1.5;
    CHECK_THROWS(generate_dataset(c));
    c = small();
    c.n_unseen = 0;
    CHECK_THROWS(generate_dataset(c));
}
