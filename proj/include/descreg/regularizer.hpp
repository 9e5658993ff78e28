#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "descreg/rng.hpp"
#include "descreg/similarity.hpp"

namespace descreg {

enum class SamplingMode {
    TopPool,       // uniform within the most/least similar pools
    Proportional,  // positive ~ S(j,.), negative ~ 1 - S(j,.)
};

struct SamplingPolicy {
    SamplingMode mode = SamplingMode::TopPool;
    std::size_t pos_pool = 1;
    std::size_t neg_pool = 1;
    std::size_t triplets_per_class = 1;

    /// pos_pool = max(1, ceil((n-1)/4)), neg_pool = max(1, ceil((n-1)/2)).
    static SamplingPolicy defaults(std::size_t n);
    void validate(std::size_t n) const;
};

enum class MarginMode { Fixed, Adaptive };

struct TripletSample {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
    double margin = 0.0;
};

struct TripletConfig {
    SamplingPolicy policy;
    MarginMode margin = MarginMode::Adaptive;
    double fixed_margin = 0.2;
    /// Anchors are classes [0, anchor_count); 0 means every class.
    std::size_t anchor_count = 0;
};

/// Loss value with its gradient w.r.t. every row of the embedding matrix.
struct LossValue {
    double value = 0.0;
    Eigen::MatrixXd grad;  // same shape as the embedding matrix
};

TripletSample sample_triplet(std::size_t anchor, const SimilarityMatrix& sim,
                             const TripletConfig& config, Rng& rng);

/// Draws triplets_per_class samples for each anchor, anchors in index order.
std::vector<TripletSample> sample_triplets(const SimilarityMatrix& sim, const TripletConfig& config,
                                           Rng& rng);

/// max{0, d(w_j,w_h) - d(w_j,w_l) + margin} with Euclidean (non-squared) d.
LossValue triplet_loss(const Eigen::MatrixXd& embeddings, const TripletSample& triplet);

/// Sum of triplet_loss over the given triplets.
LossValue triplet_loss_sum(const Eigen::MatrixXd& embeddings, const std::vector<TripletSample>& triplets);

/// Samples with `rng` and sums over all anchors. When `sampled` is non-null
/// the drawn triplets are stored there.
LossValue triplet_loss_total(const Eigen::MatrixXd& embeddings, const SimilarityMatrix& sim,
                             const TripletConfig& config, Rng& rng,
                             std::vector<TripletSample>* sampled = nullptr);

/// Mean over ordered pairs j != k of (cos(w_j,w_k) - S_norm(j,k))^2.
LossValue direct_similarity_reg(const Eigen::MatrixXd& embeddings, const SimilarityMatrix& sim);

}  // namespace descreg
