#include "descreg/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "descreg/error.hpp"

namespace descreg {

namespace {

// Below this separation the distance gradient is taken to be zero.
constexpr double kMinDistance = 1e-12;

double margin_for(const SimilarityMatrix& sim, const TripletConfig& config, std::size_t j,
                  std::size_t h, std::size_t l) {
    if (config.margin == MarginMode::Fixed) return config.fixed_margin;
    const auto J = static_cast<Eigen::Index>(j);
    return sim.normalized(J, static_cast<Eigen::Index>(h)) - sim.normalized(J, static_cast<Eigen::Index>(l));
}

// Other classes ordered by descending similarity, ties by ascending index.
std::vector<std::size_t> ranked_others(const SimilarityMatrix& sim, std::size_t j) {
    const std::size_t n = sim.n();
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
        if (k != j) order.push_back(k);
    }
    const auto J = static_cast<Eigen::Index>(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sim.normalized(J, static_cast<Eigen::Index>(a)) > sim.normalized(J, static_cast<Eigen::Index>(b));
    });
    return order;
}

std::size_t draw_weighted(const std::vector<double>& weights, Rng& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) return rng.index(weights.size());
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return i;
    }
    return weights.size() - 1;
}

void check_finite(const Eigen::MatrixXd& embeddings) {
    if (!embeddings.allFinite()) throw std::invalid_argument("embeddings contain non-finite values");
}

// Adds d/dw of `sign * ||w_a - w_b||` into grad.
double add_distance(const Eigen::MatrixXd& w, std::size_t a, std::size_t b, double sign,
                    Eigen::MatrixXd& grad) {
    const auto A = static_cast<Eigen::Index>(a);
    const auto B = static_cast<Eigen::Index>(b);
    const Eigen::RowVectorXd diff = w.row(A) - w.row(B);
    const double d = diff.norm();
    if (d >= kMinDistance) {
        grad.row(A) += (sign / d) * diff;
        grad.row(B) -= (sign / d) * diff;
    }
    return d;
}

void accumulate_triplet(const Eigen::MatrixXd& w, const TripletSample& t, LossValue& out) {
    const Eigen::Index n = w.rows();
    for (std::size_t idx : {t.anchor, t.positive, t.negative}) {
        if (static_cast<Eigen::Index>(idx) >= n) throw std::out_of_range("triplet index out of range");
    }
    const double dp = (w.row(static_cast<Eigen::Index>(t.anchor)) - w.row(static_cast<Eigen::Index>(t.positive))).norm();
    const double dn = (w.row(static_cast<Eigen::Index>(t.anchor)) - w.row(static_cast<Eigen::Index>(t.negative))).norm();
    const double hinge = dp - dn + t.margin;
    if (hinge <= 0.0) return;
    out.value += hinge;
    add_distance(w, t.anchor, t.positive, 1.0, out.grad);
    add_distance(w, t.anchor, t.negative, -1.0, out.grad);
}

}  // namespace

SamplingPolicy SamplingPolicy::defaults(std::size_t n) {
    SamplingPolicy p;
    const std::size_t others = n > 0 ? n - 1 : 0;
    p.pos_pool = std::max<std::size_t>(1, (others + 3) / 4);
    p.neg_pool = std::max<std::size_t>(1, (others + 1) / 2);
    return p;
}

void SamplingPolicy::validate(std::size_t n) const {
    if (n < 3) throw std::invalid_argument("triplet sampling needs at least 3 classes");
    if (pos_pool == 0 || neg_pool == 0) throw std::invalid_argument("sampling pools must be non-empty");
    if (triplets_per_class == 0) throw std::invalid_argument("triplets_per_class must be positive");
    if (mode == SamplingMode::TopPool && pos_pool + neg_pool > n - 1) {
        throw std::invalid_argument("pos_pool + neg_pool exceeds n - 1 = " + std::to_string(n - 1));
    }
}

TripletSample sample_triplet(std::size_t anchor, const SimilarityMatrix& sim, const TripletConfig& config,
                             Rng& rng) {
    const std::size_t n = sim.n();
    config.policy.validate(n);
    if (anchor >= n) throw std::out_of_range("anchor index out of range");

    TripletSample t;
    t.anchor = anchor;

    if (sim.kind == SimilarityKind::Diagonal) {
        // The only similar class is the anchor itself.
        t.positive = anchor;
        std::size_t l = rng.index(n - 1);
        t.negative = l >= anchor ? l + 1 : l;
        t.margin = margin_for(sim, config, anchor, t.positive, t.negative);
        return t;
    }

    const auto ranked = ranked_others(sim, anchor);
    if (config.policy.mode == SamplingMode::TopPool) {
        t.positive = ranked[rng.index(config.policy.pos_pool)];
        t.negative = ranked[ranked.size() - config.policy.neg_pool + rng.index(config.policy.neg_pool)];
    } else {
        const auto J = static_cast<Eigen::Index>(anchor);
        std::vector<double> pos_w, neg_w;
        for (std::size_t k : ranked) {
            const double s = sim.normalized(J, static_cast<Eigen::Index>(k));
            pos_w.push_back(std::max(s, 0.0));
            neg_w.push_back(std::max(1.0 - s, 0.0));
        }
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
            std::size_t h = ranked[draw_weighted(pos_w, rng)];
            std::size_t l = ranked[draw_weighted(neg_w, rng)];
            const double sh = sim.normalized(J, static_cast<Eigen::Index>(h));
            const double sl = sim.normalized(J, static_cast<Eigen::Index>(l));
            if (sh == sl) continue;
            if (sh < sl) std::swap(h, l);
            t.positive = h;
            t.negative = l;
            found = true;
        }
        if (!found) {
            t.positive = ranked.front();
            t.negative = ranked.back();
        }
    }
    t.margin = margin_for(sim, config, anchor, t.positive, t.negative);
    return t;
}

std::vector<TripletSample> sample_triplets(const SimilarityMatrix& sim, const TripletConfig& config, Rng& rng) {
    const std::size_t n = sim.n();
    const std::size_t anchors = config.anchor_count == 0 ? n : std::min(config.anchor_count, n);
    std::vector<TripletSample> out;
    out.reserve(anchors * config.policy.triplets_per_class);
    for (std::size_t j = 0; j < anchors; ++j) {
        for (std::size_t r = 0; r < config.policy.triplets_per_class; ++r) {
            out.push_back(sample_triplet(j, sim, config, rng));
        }
    }
    return out;
}

LossValue triplet_loss(const Eigen::MatrixXd& embeddings, const TripletSample& triplet) {
    check_finite(embeddings);
    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
    accumulate_triplet(embeddings, triplet, out);
    return out;
}

LossValue triplet_loss_sum(const Eigen::MatrixXd& embeddings, const std::vector<TripletSample>& triplets) {
    check_finite(embeddings);
    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
    for (const auto& t : triplets) accumulate_triplet(embeddings, t, out);
    return out;
}

LossValue triplet_loss_total(const Eigen::MatrixXd& embeddings, const SimilarityMatrix& sim,
                             const TripletConfig& config, Rng& rng, std::vector<TripletSample>* sampled) {
    if (static_cast<std::size_t>(embeddings.rows()) != sim.n()) {
        throw ShapeError("embedding rows do not match similarity matrix size");
    }
    auto triplets = sample_triplets(sim, config, rng);
    LossValue out = triplet_loss_sum(embeddings, triplets);
    if (sampled) *sampled = std::move(triplets);
    return out;
}

LossValue direct_similarity_reg(const Eigen::MatrixXd& embeddings, const SimilarityMatrix& sim) {
    const Eigen::Index n = embeddings.rows();
    if (n < 2) throw std::invalid_argument("direct similarity regularization needs at least 2 classes");
    if (static_cast<std::size_t>(n) != sim.n()) throw ShapeError("embedding rows do not match similarity matrix size");
    check_finite(embeddings);

    const Eigen::VectorXd norms = embeddings.rowwise().norm();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(norms(i) > 0.0)) {
            throw std::invalid_argument("projected embedding " + std::to_string(i) + " has zero norm");
        }
    }
    const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * embeddings;
    const Eigen::MatrixXd cos = unit * unit.transpose();
    const double scale = 1.0 / static_cast<double>(n * (n - 1));

    LossValue out;
    out.grad = Eigen::MatrixXd::Zero(n, embeddings.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (j == k) continue;
            const double r = cos(j, k) - sim.normalized(j, k);
            out.value += r * r * scale;
            const double g = 2.0 * r * scale;
            // d cos / d w_j = (u_k - cos u_j) / |w_j|, and symmetrically for w_k.
            out.grad.row(j) += (g / norms(j)) * (unit.row(k) - cos(j, k) * unit.row(j));
            out.grad.row(k) += (g / norms(k)) * (unit.row(j) - cos(j, k) * unit.row(k));
        }
    }
    return out;
}

}  // namespace descreg
