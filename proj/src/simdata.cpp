#include "descreg/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "descreg/detmetrics.hpp"
#include "descreg/error.hpp"
#include "descreg/similarity.hpp"
#include "descreg/textio.hpp"

namespace descreg {

namespace {

using Index = Eigen::Index;

enum Stream : std::uint64_t { kLatent = 1, kPrototype, kDescription, kSemantic, kFeature, kLayout, kBackground, kOrder };

std::string class_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%02zu", prefix, i + 1);
    return buf;
}

std::string image_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i);
    return buf;
}

Eigen::MatrixXd gaussian(Index rows, Index cols, double stddev, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
    }
    return m;
}

// Columns: an orthonormal basis of a random n-dimensional subspace of R^dim.
Eigen::MatrixXd random_orthonormal(std::size_t dim, std::size_t n, Rng& rng) {
    const Eigen::MatrixXd g = gaussian(static_cast<Index>(dim), static_cast<Index>(n), 1.0, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Index>(dim), static_cast<Index>(n));
}

Box random_box(Rng& rng) {
    const double w = rng.uniform(24.0, 160.0);
    const double h = rng.uniform(24.0, 160.0);
    const double x = rng.uniform(0.0, kImageSize - w);
    const double y = rng.uniform(0.0, kImageSize - h);
    return {x, y, x + w, y + h};
}

Box jitter_box(const Box& b, double jitter, Rng& rng) {
    if (jitter <= 0.0) return b;
    const double w = b.width(), h = b.height();
    Box j{b.x1 + rng.normal(0.0, jitter * w), b.y1 + rng.normal(0.0, jitter * h), b.x2 + rng.normal(0.0, jitter * w),
          b.y2 + rng.normal(0.0, jitter * h)};
    j.x1 = std::clamp(j.x1, 0.0, kImageSize);
    j.y1 = std::clamp(j.y1, 0.0, kImageSize);
    j.x2 = std::clamp(j.x2, 0.0, kImageSize);
    j.y2 = std::clamp(j.y2, 0.0, kImageSize);
    if (j.x2 - j.x1 < 1.0 || j.y2 - j.y1 < 1.0) return b;
    return j;
}

double max_iou(const Box& b, const std::vector<Box>& others) {
    double best = 0.0;
    for (const auto& o : others) best = std::max(best, iou(b, o));
    return best;
}

std::vector<std::vector<int>> chunk(const std::vector<int>& items, std::size_t per_image) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < items.size(); i += per_image) {
        out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                         items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), i + per_image)));
    }
    return out;
}

struct Builder {
    const ScenarioConfig& config;
    const Eigen::MatrixXd& prototypes;
    const Eigen::VectorXd& bg_center;
    const std::vector<std::string>& names;
    Rng feature_rng;
    std::uint64_t layout_seed;
    std::size_t image_counter = 0;

    Eigen::VectorXd feature_for(int cls) {
        const double stddev = config.noise_sigma / std::sqrt(static_cast<double>(config.feature_dim));
        Eigen::VectorXd f = cls < 0 ? bg_center : Eigen::VectorXd(prototypes.row(cls).transpose());
        if (stddev > 0.0) {
            for (Index k = 0; k < f.size(); ++k) f(k) += feature_rng.normal(0.0, stddev);
        }
        return f;
    }

    void emit_image(const std::string& id, const std::vector<int>& objects, std::size_t n_bg, RegionSet& regions,
                    std::vector<GroundTruthBox>* gt) {
        Rng rng(mix_seed(layout_seed, image_counter++));
        std::vector<Box> boxes;
        for (int cls : objects) {
            Box b = random_box(rng);
            for (int attempt = 0; attempt < 100 && max_iou(b, boxes) > 0.1; ++attempt) b = random_box(rng);
            boxes.push_back(b);
            const Box proposal = jitter_box(b, config.box_jitter, rng);
            regions.regions.push_back({id, proposal, names[static_cast<std::size_t>(cls)], feature_for(cls)});
            if (gt) gt->push_back({id, b, names[static_cast<std::size_t>(cls)]});
        }
        for (std::size_t i = 0; i < n_bg; ++i) {
            Box b = random_box(rng);
            for (int attempt = 0; attempt < 100 && max_iou(b, boxes) >= 0.3; ++attempt) b = random_box(rng);
            regions.regions.push_back({id, b, std::string(kBackgroundLabel), feature_for(-1)});
        }
    }

    void emit_images(const char* prefix, std::size_t& index, const std::vector<std::vector<int>>& images,
                     std::size_t n_bg_total, RegionSet& regions, std::vector<GroundTruthBox>* gt,
                     std::size_t bg_image_total, std::size_t& bg_image_index) {
        for (const auto& objs : images) {
            // Deal background proposals round-robin across the partition's images.
            const std::size_t n_bg = n_bg_total / bg_image_total + (bg_image_index < n_bg_total % bg_image_total ? 1 : 0);
            ++bg_image_index;
            emit_image(image_name(prefix, index++), objs, n_bg, regions, gt);
        }
    }
};

}  // namespace

void ScenarioConfig::validate() const {
    if (n_seen == 0 || n_unseen == 0) throw std::invalid_argument("scenario needs seen and unseen classes");
    if (feature_dim == 0 || regions_per_class == 0 || images == 0) {
        throw std::invalid_argument("scenario counts must be positive");
    }
    if (feature_dim < n_classes()) throw std::invalid_argument("feature_dim must be at least the class count");
    if (semantic_dim == 0 || description_dim < n_classes()) {
        throw std::invalid_argument("description_dim must be at least the class count");
    }
    if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
        throw std::invalid_argument("background_fraction must lie in [0, 1)");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in (0, 1)");
    if (!(mixed_fraction >= 0.0 && mixed_fraction <= 1.0)) throw std::invalid_argument("mixed_fraction must lie in [0, 1]");
    if (noise_sigma < 0.0 || box_jitter < 0.0 || description_noise < 0.0 || cross_group_noise < 0.0) {
        throw std::invalid_argument("noise levels must be non-negative");
    }
    if (!(group_sim_min >= 0.0 && group_sim_min <= group_sim_max && group_sim_max < 1.0)) {
        throw std::invalid_argument("group similarity range must satisfy 0 <= min <= max < 1");
    }
}

Eigen::MatrixXd plant_prototypes(const Eigen::MatrixXd& target_sim, std::size_t dim, Rng& rng) {
    const Index n = target_sim.rows();
    if (target_sim.cols() != n || n == 0) throw ShapeError("target similarity must be a non-empty square matrix");
    if (dim < static_cast<std::size_t>(n)) throw std::invalid_argument("prototype dim must be at least the class count");
    if ((target_sim - target_sim.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw std::invalid_argument("target similarity must be symmetric");
    }
    if ((target_sim.diagonal().array() - 1.0).abs().maxCoeff() > 1e-9) {
        throw std::invalid_argument("target similarity must have a unit diagonal");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(target_sim);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal();  // factor * factor^T = PSD part
    const Eigen::MatrixXd basis = random_orthonormal(dim, static_cast<std::size_t>(n), rng);
    Eigen::MatrixXd out = factor * basis.transpose();
    for (Index i = 0; i < n; ++i) {
        const double norm = out.row(i).norm();
        if (!(norm > 1e-12)) throw std::invalid_argument("target similarity collapses a class to zero norm");
        out.row(i) /= norm;
    }
    return out;
}

std::vector<std::size_t> group_assignment(const ScenarioConfig& config) {
    std::vector<std::size_t> group(config.n_classes());
    for (std::size_t s = 0; s < config.n_seen; ++s) group[s] = s % config.n_unseen;
    for (std::size_t u = 0; u < config.n_unseen; ++u) group[config.n_seen + u] = u;
    return group;
}

Eigen::MatrixXd grouped_similarity(const ScenarioConfig& config, Rng& rng) {
    config.validate();
    const std::size_t n = config.n_classes();
    const std::size_t groups = config.n_unseen;
    const auto L = static_cast<Index>(groups + n);
    const auto group = group_assignment(config);
    Eigen::MatrixXd latent = Eigen::MatrixXd::Zero(static_cast<Index>(n), L);
    const double noise = config.cross_group_noise / std::sqrt(static_cast<double>(L));
    for (std::size_t j = 0; j < n; ++j) {
        const double a = std::sqrt(rng.uniform(config.group_sim_min, config.group_sim_max));
        const auto J = static_cast<Index>(j);
        latent(J, static_cast<Index>(group[j])) = a;
        latent(J, static_cast<Index>(groups + j)) = std::sqrt(1.0 - a * a);
        for (Index k = 0; k < L; ++k) latent(J, k) += rng.normal(0.0, noise);
    }
    return cosine_matrix(latent);
}

Dataset generate_dataset(const ScenarioConfig& config) {
    Rng rng(mix_seed(config.seed, kLatent));
    return generate_dataset(config, grouped_similarity(config, rng));
}

Dataset generate_dataset(const ScenarioConfig& config, const Eigen::MatrixXd& description_sim) {
    config.validate();
    const std::size_t n = config.n_classes();
    if (static_cast<std::size_t>(description_sim.rows()) != n || description_sim.cols() != description_sim.rows()) {
        throw ShapeError("description similarity must be n_classes x n_classes");
    }

    Dataset data;
    data.description_sim = description_sim;
    Rng proto_rng(mix_seed(config.seed, kPrototype));
    data.prototypes = plant_prototypes(description_sim, config.feature_dim, proto_rng);

    ClassSplit split;
    for (std::size_t i = 0; i < config.n_seen; ++i) split.seen.push_back(class_name("seen", i));
    for (std::size_t i = 0; i < config.n_unseen; ++i) split.unseen.push_back(class_name("unseen", i));
    const auto names = split.ordered();

    Rng desc_rng(mix_seed(config.seed, kDescription));
    EmbeddingSet descriptions;
    descriptions.dim = config.description_dim;
    descriptions.names = names;
    descriptions.vectors = plant_prototypes(description_sim, config.description_dim, desc_rng) +
                           gaussian(static_cast<Index>(n), static_cast<Index>(config.description_dim),
                                    config.description_noise / std::sqrt(static_cast<double>(config.description_dim)),
                                    desc_rng);

    // Semantic embeddings carry no information about the visual geometry.
    Rng sem_rng(mix_seed(config.seed, kSemantic));
    EmbeddingSet semantic;
    semantic.dim = config.semantic_dim;
    semantic.names = names;
    semantic.vectors = gaussian(static_cast<Index>(n), static_cast<Index>(config.semantic_dim),
                                1.0 / std::sqrt(static_cast<double>(config.semantic_dim)), sem_rng);
    data.catalog = build_catalog(semantic, descriptions, split);

    // Background centre: a unit direction orthogonal to every prototype.
    Rng bg_rng(mix_seed(config.seed, kBackground));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.prototypes.transpose());
    const Eigen::MatrixXd span_basis =
        qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Index>(config.feature_dim), static_cast<Index>(n));
    Eigen::VectorXd bg_center = gaussian(static_cast<Index>(config.feature_dim), 1, 1.0, bg_rng).col(0);
    bg_center -= span_basis * (span_basis.transpose() * bg_center);
    bg_center.normalize();

    Rng order_rng(mix_seed(config.seed, kOrder));
    const auto n_test_seen = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(config.regions_per_class)));
    std::vector<int> train_objs, test_seen, test_unseen;
    for (std::size_t c = 0; c < n; ++c) {
        const bool seen = c < config.n_seen;
        for (std::size_t r = 0; r < config.regions_per_class; ++r) {
            if (!seen) {
                test_unseen.push_back(static_cast<int>(c));
            } else if (r < n_test_seen) {
                test_seen.push_back(static_cast<int>(c));
            } else {
                train_objs.push_back(static_cast<int>(c));
            }
        }
    }
    order_rng.shuffle(std::span<int>(train_objs));
    order_rng.shuffle(std::span<int>(test_seen));
    order_rng.shuffle(std::span<int>(test_unseen));

    const std::size_t total_objects = train_objs.size() + test_seen.size() + test_unseen.size();
    const std::size_t per_image = std::max<std::size_t>(1, (total_objects + config.images - 1) / config.images);

    const auto split_mixed = [&](const std::vector<int>& objs, std::vector<int>& pure, std::vector<int>& mixed) {
        const auto n_mixed = static_cast<std::size_t>(std::llround(config.mixed_fraction * static_cast<double>(objs.size())));
        mixed.insert(mixed.end(), objs.begin(), objs.begin() + static_cast<std::ptrdiff_t>(n_mixed));
        pure.assign(objs.begin() + static_cast<std::ptrdiff_t>(n_mixed), objs.end());
    };
    std::vector<int> unseen_only, seen_only, mixed;
    split_mixed(test_unseen, unseen_only, mixed);
    split_mixed(test_seen, seen_only, mixed);
    order_rng.shuffle(std::span<int>(mixed));

    const auto train_images = chunk(train_objs, per_image);
    std::vector<std::vector<int>> test_images = chunk(unseen_only, per_image);
    for (auto& img : chunk(seen_only, per_image)) test_images.push_back(std::move(img));
    for (auto& img : chunk(mixed, per_image)) test_images.push_back(std::move(img));

    const double bg_ratio = config.background_fraction / (1.0 - config.background_fraction);
    const auto bg_train = static_cast<std::size_t>(std::llround(bg_ratio * static_cast<double>(train_objs.size())));
    const auto bg_test = static_cast<std::size_t>(
        std::llround(bg_ratio * static_cast<double>(test_seen.size() + test_unseen.size())));

    Builder builder{config, data.prototypes, bg_center, names, Rng(mix_seed(config.seed, kFeature)),
                    mix_seed(config.seed, kLayout)};
    data.train.dim = config.feature_dim;
    data.test.dim = config.feature_dim;
    std::size_t train_index = 0, test_index = 0, bg_i = 0;
    builder.emit_images("train", train_index, train_images, bg_train, data.train, nullptr,
                        std::max<std::size_t>(1, train_images.size()), bg_i);
    bg_i = 0;
    builder.emit_images("test", test_index, test_images, bg_test, data.test, &data.test_gt,
                        std::max<std::size_t>(1, test_images.size()), bg_i);
    return data;
}

double offdiag_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) throw ShapeError("matrices must match");
    std::vector<double> xs, ys;
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = i + 1; j < a.cols(); ++j) {
            xs.push_back(a(i, j));
            ys.push_back(b(i, j));
        }
    }
    if (xs.size() < 2) throw std::invalid_argument("need at least 3 classes for a correlation");
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
    save_catalog_dir(dataset.catalog, dir);
    const std::filesystem::path root(dir);
    textio::write_file((root / kTrainRegionsFile).string(), format_regions(dataset.train));
    textio::write_file((root / kTestRegionsFile).string(), format_regions(dataset.test));
    textio::write_file((root / kTestGroundTruthFile).string(), format_ground_truth(dataset.test_gt));
}

}  // namespace descreg
