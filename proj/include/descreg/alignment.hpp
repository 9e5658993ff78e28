#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "descreg/catalog.hpp"
#include "descreg/regions.hpp"
#include "descreg/regularizer.hpp"
#include "descreg/rng.hpp"
#include "descreg/similarity.hpp"

namespace descreg {

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Stack of dense layers with ReLU between consecutive layers (none after
/// the last). Rows of an input matrix are independent samples.
class ProjectionHead {
public:
    ProjectionHead() = default;
    explicit ProjectionHead(std::vector<DenseLayer> layers);

    /// Kaiming-normal weights (std sqrt(2/in) before a ReLU, sqrt(1/in) on
    /// the last layer), zero biases. `hidden` is ignored for depth 1.
    static ProjectionHead random(std::size_t input_dim, std::size_t output_dim, std::size_t depth,
                                 std::size_t hidden, Rng& rng);

    std::size_t depth() const { return layers_.size(); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;
    const std::vector<DenseLayer>& layers() const { return layers_; }

    Eigen::MatrixXd project(const Eigen::MatrixXd& inputs) const;

    /// Layer inputs recorded by forward() for use by backward().
    struct Trace {
        std::vector<Eigen::MatrixXd> inputs;
    };
    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Trace& trace) const;

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
    void backward(const Trace& trace, const Eigen::MatrixXd& grad_output, std::span<double> grad) const;

    std::size_t parameter_count() const;
    void pack(std::span<double> out) const;
    void unpack(std::span<const double> in);

private:
    std::vector<DenseLayer> layers_;
};

/// w_j = head(input_j) for every row of `class_embeddings`.
Eigen::MatrixXd project(const ProjectionHead& head, const Eigen::MatrixXd& class_embeddings);

enum class EmbeddingSource { Semantic, Description, OneHot };

std::string to_string(EmbeddingSource source);
EmbeddingSource parse_embedding_source(std::string_view text);

/// Which classes compete in a score vector. Background is always appended.
enum class ClassSet { Seen, Unseen, All };

/// Cosine classifier over projected class embeddings plus a background vector.
///
/// `class_inputs` row j is the head input for class j in catalog order
/// (seen classes first). For synthesized-feature classifiers the inputs are
/// one-hot rows and the head is a single linear layer, so the projected
/// embeddings are the classifier weights themselves.
struct AlignmentModel {
    ProjectionHead head;
    Eigen::VectorXd background;
    double score_scale = 20.0;
    EmbeddingSource source = EmbeddingSource::Semantic;
    std::vector<std::string> class_names;
    std::size_t n_seen = 0;
    Eigen::MatrixXd class_inputs;

    std::size_t n_classes() const { return class_names.size(); }
    std::size_t visual_dim() const { return static_cast<std::size_t>(background.size()); }
    Eigen::MatrixXd class_weights() const { return head.project(class_inputs); }
    std::vector<std::size_t> class_indices(ClassSet set) const;

    std::size_t parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& params);

    void validate() const;
};

/// Head inputs for the catalog under the chosen embedding source.
Eigen::MatrixXd class_inputs_for(const ClassCatalog& catalog, EmbeddingSource source);

/// Scores score_scale * cos(w_j, v) for the classes of `set` in index order,
/// followed by score_scale * cos(background, v).
Eigen::VectorXd classification_scores(const AlignmentModel& model, const Eigen::VectorXd& feature, ClassSet set);

/// Feature rows paired with catalog class indices; kBackgroundIndex marks background.
struct LabeledFeatures {
    static constexpr int kBackgroundIndex = -1;
    Eigen::MatrixXd features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

LabeledFeatures label_regions(const RegionSet& regions, const std::vector<std::string>& class_names);

struct ModelLoss {
    double value = 0.0;
    Eigen::VectorXd grad;  // layout of AlignmentModel::parameters()
};

/// Mean cross-entropy of softmax(scores over `set` + background).
/// Labels outside `set` (other than background) throw.
ModelLoss classification_loss(const AlignmentModel& model, const LabeledFeatures& batch, ClassSet set = ClassSet::Seen);

enum class RegMode { Off, Adaptive, Fixed, Diagonal, DirectL2 };

std::string to_string(RegMode mode);
RegMode parse_reg_mode(std::string_view text);

struct RegularizerConfig {
    RegMode mode = RegMode::Adaptive;
    double tau = 0.03;
    double fixed_margin = 0.2;
    std::size_t pos_pool = 0;  // 0: derived from the class count
    std::size_t neg_pool = 0;  // 0: derived from the class count
    SamplingMode sampling = SamplingMode::TopPool;
    std::size_t triplets_per_class = 1;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    bool include_unseen = true;
};

/// The structural regularizer over class embeddings, bound to one catalog.
/// The similarity matrix is computed once at construction.
class Regularizer {
public:
    Regularizer(const RegularizerConfig& config, const ClassCatalog& catalog);

    const RegularizerConfig& config() const { return config_; }
    const SimilarityMatrix& similarity() const { return sim_; }
    const TripletConfig& triplet_config() const { return triplet_; }

    /// Unweighted regularizer value and gradient w.r.t. the embedding rows.
    LossValue evaluate(const Eigen::MatrixXd& embeddings, Rng& rng) const;

private:
    RegularizerConfig config_;
    SimilarityMatrix sim_;
    TripletConfig triplet_;
};

struct ObjectiveTerms {
    double cls = 0.0;
    double reg = 0.0;  // unweighted
    Eigen::VectorXd grad_cls;
    Eigen::VectorXd grad_reg;  // already multiplied by lambda
    Eigen::VectorXd grad_total() const { return grad_cls + grad_reg; }
    double total(double lambda) const { return cls + lambda * reg; }
};

/// L = L_cls + lambda * L_reg with separate gradients for each term.
ObjectiveTerms objective(const AlignmentModel& model, const LabeledFeatures& batch, const Regularizer& regularizer,
                         Rng& rng, ClassSet set = ClassSet::Seen);

struct TrainConfig {
    double lr = 0.02;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t epochs = 12;
    std::size_t batch = 128;
    std::uint64_t seed = 0;
    std::size_t depth = 1;
    std::size_t hidden = 128;
    double score_scale = 20.0;
    EmbeddingSource source = EmbeddingSource::Semantic;
    RegularizerConfig reg;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double cls_loss = 0.0;
    double reg_loss = 0.0;
    double seen_accuracy = 0.0;    // NaN without validation data
    double unseen_accuracy = 0.0;  // NaN without validation data
};

using TrainHistory = std::vector<EpochRecord>;

std::string format_history_csv(const TrainHistory& history);

struct TrainResult {
    AlignmentModel model;
    TrainHistory history;
};

/// Seen accuracy: seen-class rows scored over seen + background.
/// Unseen accuracy: unseen-class rows scored over unseen classes only.
double seen_accuracy(const AlignmentModel& model, const LabeledFeatures& data);
double unseen_accuracy(const AlignmentModel& model, const LabeledFeatures& data);

/// Heavy-ball SGD with L2 weight decay folded into the gradient:
/// v = m v + (g + wd p); p -= lr v.
struct SgdMomentum {
    double lr;
    double momentum;
    double weight_decay;
    Eigen::VectorXd velocity;

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

/// Stage-2 training of the projection head and background vector.
/// Training rows must be labeled with seen classes or background.
/// `validation` (may be null) only feeds the per-epoch accuracies.
TrainResult train_alignment(const ClassCatalog& catalog, const LabeledFeatures& train, const TrainConfig& config,
                            const LabeledFeatures* validation = nullptr);

enum class Setting { ZSD, GZSD };

std::string to_string(Setting setting);
Setting parse_setting(std::string_view text);

/// One detection per region: the argmax over the setting's classes plus
/// background, dropped when background wins. Score is the softmax probability.
std::vector<Detection> infer_detections(const AlignmentModel& model, const RegionSet& regions, Setting setting);

std::string format_model(const AlignmentModel& model);
AlignmentModel parse_model(std::istream& in);
AlignmentModel load_model(const std::string& path);

}  // namespace descreg
