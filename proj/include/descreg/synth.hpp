#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "descreg/alignment.hpp"
#include "descreg/catalog.hpp"
#include "descreg/rng.hpp"

namespace descreg {

/// Noise-conditioned feature generator: v = g([c_j, z]) with z ~ N(0, I).
struct Synthesizer {
    ProjectionHead generator;  // (embedding dim + noise_dim) -> visual dim
    std::size_t noise_dim = 16;
    EmbeddingSource source = EmbeddingSource::Semantic;
    std::vector<std::string> class_names;
    std::size_t n_seen = 0;
    Eigen::MatrixXd class_inputs;  // catalog order

    std::size_t n_classes() const { return class_names.size(); }
    std::size_t embedding_dim() const { return static_cast<std::size_t>(class_inputs.cols()); }
    std::size_t visual_dim() const { return generator.output_dim(); }
    void validate() const;
};

/// One generated feature. Throws ShapeError on dimension mismatch.
Eigen::VectorXd synthesize(const Synthesizer& synth, const Eigen::VectorXd& class_embedding,
                           const Eigen::VectorXd& noise);

/// `count` features of one class, noise drawn from `rng`.
Eigen::MatrixXd sample_features(const Synthesizer& synth, std::size_t class_index, std::size_t count, Rng& rng);

struct SynthConfig {
    std::size_t noise_dim = 16;
    std::size_t hidden = 128;
    std::size_t batch_per_class = 32;
    std::size_t steps = 600;
    double lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    EmbeddingSource source = EmbeddingSource::Semantic;
    /// Triplet term on synthesized class means; reg.lambda weights it.
    RegularizerConfig reg;
};

struct SynthObjective {
    double moment = 0.0;
    double reg = 0.0;  // unweighted
    double lambda = 0.0;
    Eigen::VectorXd grad;  // generator parameters, lambda already applied
    Eigen::MatrixXd class_means;

    double total() const { return moment + lambda * reg; }
};

/// Per-class real feature means (rows in catalog seen order).
Eigen::MatrixXd seen_class_means(const LabeledFeatures& data, std::size_t n_seen);

/// Moment term sum over seen j of |mean_j(synth) - mean_j(real)|^2 plus
/// lambda times the regularizer on the synthesized means of every class.
/// `noise` holds batch_per_class rows per class, class-major.
/// `regularizer` may be null, in which case the second term is zero.
SynthObjective synth_objective(const Synthesizer& synth, const Eigen::MatrixXd& real_means, const Eigen::MatrixXd& noise,
                               std::size_t batch_per_class, const Regularizer* regularizer, Rng& rng);

struct SynthHistoryRecord {
    std::size_t step = 0;
    double moment = 0.0;
    double reg = 0.0;
};

struct SynthResult {
    Synthesizer synth;
    std::vector<SynthHistoryRecord> history;  // one entry per 50 steps and the last
};

/// Requires at least one region of every seen class; background rows are ignored.
SynthResult train_synthesizer(const ClassCatalog& catalog, const LabeledFeatures& train, const SynthConfig& config);

struct SynthClassifierConfig {
    std::size_t samples_per_class = 200;
    std::size_t epochs = 12;
    std::size_t batch = 128;
    double lr = 0.02;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double score_scale = 20.0;
    std::uint64_t seed = 0;
};

/// Softmax classifier over every class plus background, trained on
/// synthesized features (and the background rows of `background`, if any).
/// The result is a one-hot-input AlignmentModel, so inference and
/// evaluation treat it like any alignment model.
AlignmentModel train_classifier_from_synth(const Synthesizer& synth, const LabeledFeatures& background,
                                           const SynthClassifierConfig& config);

std::string format_synth(const Synthesizer& synth);
Synthesizer parse_synth(std::istream& in);
Synthesizer load_synth(const std::string& path);

}  // namespace descreg
