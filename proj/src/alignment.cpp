#include "descreg/alignment.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"
#include "model_io.hpp"

namespace descreg {

namespace {

using Index = Eigen::Index;

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& m, Eigen::VectorXd& norms, const char* what) {
    norms = m.rowwise().norm();
    for (Index i = 0; i < norms.size(); ++i) {
        if (!(norms(i) > 0.0) || !std::isfinite(norms(i))) {
            throw std::invalid_argument(std::string(what) + " " + std::to_string(i) + " has zero or non-finite norm");
        }
    }
    return norms.cwiseInverse().asDiagonal() * m;
}

// Rows of the competing classes followed by the background row.
Eigen::MatrixXd stack_candidates(const Eigen::MatrixXd& weights, const Eigen::VectorXd& background,
                                 const std::vector<std::size_t>& indices) {
    Eigen::MatrixXd out(static_cast<Index>(indices.size()) + 1, weights.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.row(static_cast<Index>(i)) = weights.row(static_cast<Index>(indices[i]));
    }
    out.row(static_cast<Index>(indices.size())) = background.transpose();
    return out;
}

struct ClsGrad {
    double value = 0.0;
    Eigen::MatrixXd d_weights;
    Eigen::VectorXd d_background;
};

ClsGrad cls_loss_on_weights(const Eigen::MatrixXd& weights, const Eigen::VectorXd& background, double scale,
                            const LabeledFeatures& batch, const std::vector<std::size_t>& indices,
                            std::size_t n_classes) {
    const Index m = static_cast<Index>(batch.size());
    if (m == 0) throw std::invalid_argument("classification loss on an empty batch");
    if (batch.features.cols() != weights.cols()) throw ShapeError("feature dimension does not match the model");

    std::vector<int> position(n_classes, -1);
    for (std::size_t i = 0; i < indices.size(); ++i) position[indices[i]] = static_cast<int>(i);
    const Index c = static_cast<Index>(indices.size()) + 1;

    std::vector<Index> target(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        const int label = batch.labels[static_cast<std::size_t>(i)];
        if (label == LabeledFeatures::kBackgroundIndex) {
            target[static_cast<std::size_t>(i)] = c - 1;
        } else if (label >= 0 && static_cast<std::size_t>(label) < n_classes && position[static_cast<std::size_t>(label)] >= 0) {
            target[static_cast<std::size_t>(i)] = position[static_cast<std::size_t>(label)];
        } else {
            throw std::invalid_argument("label " + std::to_string(label) + " is outside the trained class set");
        }
    }

    const Eigen::MatrixXd cand = stack_candidates(weights, background, indices);
    Eigen::VectorXd cand_norms, feat_norms;
    const Eigen::MatrixXd cand_unit = normalized_rows(cand, cand_norms, "class embedding");
    const Eigen::MatrixXd feat_unit = normalized_rows(batch.features, feat_norms, "region feature");
    const Eigen::MatrixXd cos = cand_unit * feat_unit.transpose();  // c x m

    Eigen::MatrixXd g(c, m);
    double loss = 0.0;
    for (Index i = 0; i < m; ++i) {
        const Eigen::VectorXd z = scale * cos.col(i);
        const double zmax = z.maxCoeff();
        const Eigen::VectorXd e = (z.array() - zmax).exp();
        const double sum = e.sum();
        const Index y = target[static_cast<std::size_t>(i)];
        loss += -(z(y) - zmax - std::log(sum));
        g.col(i) = e / sum;
        g(y, i) -= 1.0;
    }
    g /= static_cast<double>(m);
    loss /= static_cast<double>(m);

    // d z_ci / d u_c = scale (v_i - cos_ci u_c_hat) / |u_c|
    const Eigen::VectorXd gc = (g.cwiseProduct(cos)).rowwise().sum();
    Eigen::MatrixXd d_cand = g * feat_unit - gc.asDiagonal() * cand_unit;
    d_cand = scale * (cand_norms.cwiseInverse().asDiagonal() * d_cand);

    ClsGrad out;
    out.value = loss;
    out.d_weights = Eigen::MatrixXd::Zero(weights.rows(), weights.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.d_weights.row(static_cast<Index>(indices[i])) = d_cand.row(static_cast<Index>(i));
    }
    out.d_background = d_cand.row(c - 1).transpose();
    return out;
}

// Index of the best-scoring candidate for each feature row; ties go to the lower index.
std::vector<Index> argmax_candidates(const Eigen::MatrixXd& cand, const Eigen::MatrixXd& features) {
    Eigen::VectorXd cn, fn;
    const Eigen::MatrixXd cu = normalized_rows(cand, cn, "class embedding");
    const Eigen::MatrixXd fu = normalized_rows(features, fn, "region feature");
    const Eigen::MatrixXd cos = cu * fu.transpose();
    std::vector<Index> out(static_cast<std::size_t>(features.rows()));
    for (Index i = 0; i < features.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < cand.rows(); ++c) {
            if (cos(c, i) > cos(best, i)) best = c;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

double accuracy_impl(const AlignmentModel& model, const LabeledFeatures& data, ClassSet set, bool with_background) {
    const auto indices = model.class_indices(set);
    std::vector<bool> member(model.n_classes(), false);
    for (auto i : indices) member[i] = true;

    std::vector<Index> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int label = data.labels[i];
        if (label >= 0 && member[static_cast<std::size_t>(label)]) rows.push_back(static_cast<Index>(i));
    }
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();

    Eigen::MatrixXd feats(static_cast<Index>(rows.size()), data.features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) feats.row(static_cast<Index>(r)) = data.features.row(rows[r]);

    const Eigen::MatrixXd weights = model.class_weights();
    Eigen::MatrixXd cand;
    if (with_background) {
        cand = stack_candidates(weights, model.background, indices);
    } else {
        cand.resize(static_cast<Index>(indices.size()), weights.cols());
        for (std::size_t i = 0; i < indices.size(); ++i) cand.row(static_cast<Index>(i)) = weights.row(static_cast<Index>(indices[i]));
    }
    const auto pred = argmax_candidates(cand, feats);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Index p = pred[r];
        if (p < static_cast<Index>(indices.size()) &&
            static_cast<int>(indices[static_cast<std::size_t>(p)]) == data.labels[static_cast<std::size_t>(rows[r])]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// ProjectionHead

ProjectionHead::ProjectionHead(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("projection head needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        if (L.weight.rows() != L.bias.size() || L.weight.rows() == 0 || L.weight.cols() == 0) {
            throw ShapeError("layer " + std::to_string(l) + ": weight/bias shapes disagree");
        }
        if (l > 0 && L.weight.cols() != layers_[l - 1].weight.rows()) {
            throw ShapeError("layer " + std::to_string(l) + ": input dim does not match previous output");
        }
    }
}

ProjectionHead ProjectionHead::random(std::size_t input_dim, std::size_t output_dim, std::size_t depth,
                                      std::size_t hidden, Rng& rng) {
    if (depth < 1 || depth > 3) throw std::invalid_argument("head depth must be 1, 2 or 3");
    if (input_dim == 0 || output_dim == 0 || (depth > 1 && hidden == 0)) {
        throw std::invalid_argument("head dimensions must be positive");
    }
    std::vector<DenseLayer> layers;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < depth; ++l) {
        const bool last = l + 1 == depth;
        const std::size_t out = last ? output_dim : hidden;
        const double stddev = std::sqrt((last ? 1.0 : 2.0) / static_cast<double>(in));
        DenseLayer layer;
        layer.weight.resize(static_cast<Index>(out), static_cast<Index>(in));
        for (Index c = 0; c < layer.weight.cols(); ++c) {
            for (Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = rng.normal(0.0, stddev);
        }
        layer.bias = Eigen::VectorXd::Zero(static_cast<Index>(out));
        layers.push_back(std::move(layer));
        in = out;
    }
    return ProjectionHead(std::move(layers));
}

std::size_t ProjectionHead::input_dim() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t ProjectionHead::output_dim() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

Eigen::MatrixXd ProjectionHead::project(const Eigen::MatrixXd& inputs) const {
    Trace trace;
    return forward(inputs, trace);
}

Eigen::MatrixXd ProjectionHead::forward(const Eigen::MatrixXd& inputs, Trace& trace) const {
    if (layers_.empty()) throw ShapeError("projection head has no layers");
    if (static_cast<std::size_t>(inputs.cols()) != input_dim()) {
        throw ShapeError("head input dim " + std::to_string(input_dim()) + " does not match embedding dim " +
                         std::to_string(inputs.cols()));
    }
    trace.inputs.clear();
    Eigen::MatrixXd h = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        trace.inputs.push_back(h);
        Eigen::MatrixXd z = h * layers_[l].weight.transpose();
        z.rowwise() += layers_[l].bias.transpose();
        if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return h;
}

void ProjectionHead::backward(const Trace& trace, const Eigen::MatrixXd& grad_output, std::span<double> grad) const {
    if (grad.size() != parameter_count()) throw ShapeError("gradient buffer has the wrong size");
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(layers_[l].weight.size() + layers_[l].bias.size());
    }
    Eigen::MatrixXd g = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& L = layers_[l];
        Eigen::Map<Eigen::MatrixXd> dW(grad.data() + offsets[l], L.weight.rows(), L.weight.cols());
        Eigen::Map<Eigen::VectorXd> db(grad.data() + offsets[l] + L.weight.size(), L.bias.size());
        dW += g.transpose() * trace.inputs[l];
        db += g.colwise().sum().transpose();
        if (l > 0) {
            g = g * L.weight;
            // ReLU mask: the layer input is positive exactly where the previous pre-activation was.
            g = g.cwiseProduct((trace.inputs[l].array() > 0.0).cast<double>().matrix());
        }
    }
}

std::size_t ProjectionHead::parameter_count() const {
    std::size_t n = 0;
    for (const auto& L : layers_) n += static_cast<std::size_t>(L.weight.size() + L.bias.size());
    return n;
}

void ProjectionHead::pack(std::span<double> out) const {
    if (out.size() != parameter_count()) throw ShapeError("parameter buffer has the wrong size");
    std::size_t off = 0;
    for (const auto& L : layers_) {
        std::copy(L.weight.data(), L.weight.data() + L.weight.size(), out.begin() + static_cast<std::ptrdiff_t>(off));
        off += static_cast<std::size_t>(L.weight.size());
        std::copy(L.bias.data(), L.bias.data() + L.bias.size(), out.begin() + static_cast<std::ptrdiff_t>(off));
        off += static_cast<std::size_t>(L.bias.size());
    }
}

void ProjectionHead::unpack(std::span<const double> in) {
    if (in.size() != parameter_count()) throw ShapeError("parameter buffer has the wrong size");
    std::size_t off = 0;
    for (auto& L : layers_) {
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                  in.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(L.weight.size())),
                  L.weight.data());
        off += static_cast<std::size_t>(L.weight.size());
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                  in.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(L.bias.size())),
                  L.bias.data());
        off += static_cast<std::size_t>(L.bias.size());
    }
}

Eigen::MatrixXd project(const ProjectionHead& head, const Eigen::MatrixXd& class_embeddings) {
    return head.project(class_embeddings);
}

// ---------------------------------------------------------------------------
// Enum text

std::string to_string(EmbeddingSource source) {
    switch (source) {
        case EmbeddingSource::Semantic: return "semantic";
        case EmbeddingSource::Description: return "description";
        case EmbeddingSource::OneHot: return "onehot";
    }
    return "semantic";
}

EmbeddingSource parse_embedding_source(std::string_view text) {
    if (text == "semantic") return EmbeddingSource::Semantic;
    if (text == "description") return EmbeddingSource::Description;
    if (text == "onehot") return EmbeddingSource::OneHot;
    throw std::invalid_argument("unknown embedding source '" + std::string(text) + "'");
}

std::string to_string(RegMode mode) {
    switch (mode) {
        case RegMode::Off: return "off";
        case RegMode::Adaptive: return "adaptive";
        case RegMode::Fixed: return "fixed";
        case RegMode::Diagonal: return "diagonal";
        case RegMode::DirectL2: return "direct_l2";
    }
    return "off";
}

RegMode parse_reg_mode(std::string_view text) {
    if (text == "off") return RegMode::Off;
    if (text == "adaptive") return RegMode::Adaptive;
    if (text == "fixed") return RegMode::Fixed;
    if (text == "diagonal") return RegMode::Diagonal;
    if (text == "direct_l2") return RegMode::DirectL2;
    throw std::invalid_argument("unknown regularizer mode '" + std::string(text) + "'");
}

std::string to_string(Setting setting) { return setting == Setting::ZSD ? "zsd" : "gzsd"; }

Setting parse_setting(std::string_view text) {
    if (text == "zsd") return Setting::ZSD;
    if (text == "gzsd") return Setting::GZSD;
    throw std::invalid_argument("unknown setting '" + std::string(text) + "' (expected zsd or gzsd)");
}

// ---------------------------------------------------------------------------
// AlignmentModel

std::vector<std::size_t> AlignmentModel::class_indices(ClassSet set) const {
    std::vector<std::size_t> out;
    const std::size_t begin = set == ClassSet::Unseen ? n_seen : 0;
    const std::size_t end = set == ClassSet::Seen ? n_seen : n_classes();
    for (std::size_t i = begin; i < end; ++i) out.push_back(i);
    return out;
}

std::size_t AlignmentModel::parameter_count() const {
    return head.parameter_count() + static_cast<std::size_t>(background.size());
}

Eigen::VectorXd AlignmentModel::parameters() const {
    Eigen::VectorXd p(static_cast<Index>(parameter_count()));
    head.pack(std::span<double>(p.data(), head.parameter_count()));
    p.tail(background.size()) = background;
    return p;
}

void AlignmentModel::set_parameters(const Eigen::VectorXd& params) {
    if (static_cast<std::size_t>(params.size()) != parameter_count()) throw ShapeError("parameter vector has the wrong size");
    head.unpack(std::span<const double>(params.data(), head.parameter_count()));
    background = params.tail(background.size());
}

void AlignmentModel::validate() const {
    if (class_names.empty()) throw ShapeError("model has no classes");
    if (n_seen > class_names.size()) throw ShapeError("seen count exceeds class count");
    if (static_cast<std::size_t>(class_inputs.rows()) != class_names.size()) {
        throw ShapeError("class input rows do not match class count");
    }
    if (static_cast<std::size_t>(class_inputs.cols()) != head.input_dim()) {
        throw ShapeError("class input dim does not match head input dim");
    }
    if (head.output_dim() != visual_dim()) throw ShapeError("background length does not match visual dim");
    if (!(score_scale > 0.0)) throw std::invalid_argument("score scale must be positive");
}

Eigen::MatrixXd class_inputs_for(const ClassCatalog& catalog, EmbeddingSource source) {
    switch (source) {
        case EmbeddingSource::Semantic: return catalog.semantic.vectors;
        case EmbeddingSource::Description: return catalog.descriptions.vectors;
        case EmbeddingSource::OneHot: {
            const auto n = static_cast<Index>(catalog.size());
            return Eigen::MatrixXd::Identity(n, n);
        }
    }
    return catalog.semantic.vectors;
}

Eigen::VectorXd classification_scores(const AlignmentModel& model, const Eigen::VectorXd& feature, ClassSet set) {
    if (static_cast<std::size_t>(feature.size()) != model.visual_dim()) throw ShapeError("feature dim does not match model");
    const double fnorm = feature.norm();
    if (!(fnorm > 0.0)) throw std::invalid_argument("region feature has zero norm");
    const auto indices = model.class_indices(set);
    const Eigen::MatrixXd cand = stack_candidates(model.class_weights(), model.background, indices);
    Eigen::VectorXd norms;
    const Eigen::MatrixXd unit = normalized_rows(cand, norms, "class embedding");
    return model.score_scale * (unit * (feature / fnorm));
}

LabeledFeatures label_regions(const RegionSet& regions, const std::vector<std::string>& class_names) {
    LabeledFeatures out;
    out.features.resize(static_cast<Index>(regions.regions.size()), static_cast<Index>(regions.dim));
    out.labels.reserve(regions.regions.size());
    for (std::size_t i = 0; i < regions.regions.size(); ++i) {
        const auto& r = regions.regions[i];
        if (static_cast<std::size_t>(r.feature.size()) != regions.dim) throw ShapeError("region feature has wrong dimension");
        out.features.row(static_cast<Index>(i)) = r.feature.transpose();
        if (r.is_background()) {
            out.labels.push_back(LabeledFeatures::kBackgroundIndex);
            continue;
        }
        int label = -2;
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            if (class_names[c] == r.label) {
                label = static_cast<int>(c);
                break;
            }
        }
        if (label < 0) throw FormatError("region " + std::to_string(i) + " has unknown class '" + r.label + "'");
        out.labels.push_back(label);
    }
    return out;
}

ModelLoss classification_loss(const AlignmentModel& model, const LabeledFeatures& batch, ClassSet set) {
    ProjectionHead::Trace trace;
    const Eigen::MatrixXd weights = model.head.forward(model.class_inputs, trace);
    const auto g = cls_loss_on_weights(weights, model.background, model.score_scale, batch, model.class_indices(set),
                                       model.n_classes());
    ModelLoss out;
    out.value = g.value;
    out.grad = Eigen::VectorXd::Zero(static_cast<Index>(model.parameter_count()));
    model.head.backward(trace, g.d_weights, std::span<double>(out.grad.data(), model.head.parameter_count()));
    out.grad.tail(model.background.size()) = g.d_background;
    return out;
}

// ---------------------------------------------------------------------------
// Regularizer

Regularizer::Regularizer(const RegularizerConfig& config, const ClassCatalog& catalog) : config_(config) {
    const std::size_t n = catalog.size();
    if (config.mode == RegMode::Off) {
        sim_ = diagonal_matrix(std::max<std::size_t>(n, 2));
        return;
    }
    sim_ = config.mode == RegMode::Diagonal ? diagonal_matrix(n) : description_similarity(catalog.descriptions, config.tau);
    triplet_.policy = SamplingPolicy::defaults(n);
    triplet_.policy.mode = config.sampling;
    if (config.pos_pool) triplet_.policy.pos_pool = config.pos_pool;
    if (config.neg_pool) triplet_.policy.neg_pool = config.neg_pool;
    triplet_.policy.triplets_per_class = config.triplets_per_class;
    triplet_.margin = config.mode == RegMode::Fixed ? MarginMode::Fixed : MarginMode::Adaptive;
    triplet_.fixed_margin = config.fixed_margin;
    triplet_.anchor_count = config.include_unseen ? 0 : catalog.n_seen();
    if (config.mode != RegMode::DirectL2) triplet_.policy.validate(n);
}

LossValue Regularizer::evaluate(const Eigen::MatrixXd& embeddings, Rng& rng) const {
    switch (config_.mode) {
        case RegMode::Off: {
            LossValue zero;
            zero.grad = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
            return zero;
        }
        case RegMode::DirectL2: return direct_similarity_reg(embeddings, sim_);
        case RegMode::Adaptive:
        case RegMode::Fixed:
        case RegMode::Diagonal: return triplet_loss_total(embeddings, sim_, triplet_, rng);
    }
    throw std::logic_error("unhandled regularizer mode");
}

ObjectiveTerms objective(const AlignmentModel& model, const LabeledFeatures& batch, const Regularizer& regularizer,
                         Rng& rng, ClassSet set) {
    ProjectionHead::Trace trace;
    const Eigen::MatrixXd weights = model.head.forward(model.class_inputs, trace);
    const std::size_t head_params = model.head.parameter_count();
    const auto P = static_cast<Index>(model.parameter_count());

    ObjectiveTerms out;
    const auto cls = cls_loss_on_weights(weights, model.background, model.score_scale, batch, model.class_indices(set),
                                         model.n_classes());
    out.cls = cls.value;
    out.grad_cls = Eigen::VectorXd::Zero(P);
    model.head.backward(trace, cls.d_weights, std::span<double>(out.grad_cls.data(), head_params));
    out.grad_cls.tail(model.background.size()) = cls.d_background;

    out.grad_reg = Eigen::VectorXd::Zero(P);
    if (regularizer.config().mode != RegMode::Off) {
        const LossValue reg = regularizer.evaluate(weights, rng);
        out.reg = reg.value;
        const Eigen::MatrixXd scaled = regularizer.config().lambda * reg.grad;
        model.head.backward(trace, scaled, std::span<double>(out.grad_reg.data(), head_params));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training

void SgdMomentum::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (velocity.size() != params.size()) velocity = Eigen::VectorXd::Zero(params.size());
    velocity = momentum * velocity + grad + weight_decay * params;
    params -= lr * velocity;
}

double seen_accuracy(const AlignmentModel& model, const LabeledFeatures& data) {
    return accuracy_impl(model, data, ClassSet::Seen, true);
}

double unseen_accuracy(const AlignmentModel& model, const LabeledFeatures& data) {
    return accuracy_impl(model, data, ClassSet::Unseen, false);
}

std::string format_history_csv(const TrainHistory& history) {
    std::string out = "epoch,cls_loss,reg_loss,seen_accuracy,unseen_accuracy\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + ',' + textio::format_real(r.cls_loss) + ',' + textio::format_real(r.reg_loss) +
               ',' + (std::isnan(r.seen_accuracy) ? std::string("nan") : textio::format_real(r.seen_accuracy)) + ',' +
               (std::isnan(r.unseen_accuracy) ? std::string("nan") : textio::format_real(r.unseen_accuracy)) + '\n';
    }
    return out;
}

TrainResult train_alignment(const ClassCatalog& catalog, const LabeledFeatures& train, const TrainConfig& config,
                            const LabeledFeatures* validation) {
    if (train.size() == 0) throw std::invalid_argument("empty training set");
    if (config.batch == 0) throw std::invalid_argument("batch size must be positive");
    if (!(config.score_scale > 0.0)) throw std::invalid_argument("score scale must be positive");
    for (int label : train.labels) {
        if (label != LabeledFeatures::kBackgroundIndex &&
            (label < 0 || static_cast<std::size_t>(label) >= catalog.n_seen())) {
            throw std::invalid_argument("training regions must be labeled with seen classes or background");
        }
    }

    Rng init_rng(mix_seed(config.seed, 1));
    Rng shuffle_rng(mix_seed(config.seed, 2));
    Rng reg_rng(mix_seed(config.seed ^ mix_seed(config.reg.seed, 7), 3));

    AlignmentModel model;
    model.source = config.source;
    model.class_names = catalog.names();
    model.n_seen = catalog.n_seen();
    model.class_inputs = class_inputs_for(catalog, config.source);
    model.score_scale = config.score_scale;
    const auto visual_dim = static_cast<std::size_t>(train.features.cols());
    model.head = ProjectionHead::random(static_cast<std::size_t>(model.class_inputs.cols()), visual_dim, config.depth,
                                       config.hidden, init_rng);
    model.background.resize(static_cast<Index>(visual_dim));
    for (Index i = 0; i < model.background.size(); ++i) model.background(i) = init_rng.normal(0.0, 0.01);

    const Regularizer regularizer(config.reg, catalog);
    SgdMomentum opt{config.lr, config.momentum, config.weight_decay, {}};
    Eigen::VectorXd params = model.parameters();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double cls_sum = 0.0, reg_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            LabeledFeatures batch;
            batch.features.resize(static_cast<Index>(end - start), train.features.cols());
            batch.labels.resize(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch.features.row(static_cast<Index>(i - start)) = train.features.row(static_cast<Index>(order[i]));
                batch.labels[i - start] = train.labels[order[i]];
            }
            const ObjectiveTerms terms = objective(model, batch, regularizer, reg_rng);
            cls_sum += terms.cls * static_cast<double>(end - start);
            reg_sum += terms.reg;
            ++steps;
            opt.step(params, terms.grad_total());
            model.set_parameters(params);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.cls_loss = cls_sum / static_cast<double>(train.size());
        rec.reg_loss = reg_sum / static_cast<double>(steps);
        rec.seen_accuracy = validation ? seen_accuracy(model, *validation) : std::numeric_limits<double>::quiet_NaN();
        rec.unseen_accuracy = validation ? unseen_accuracy(model, *validation) : std::numeric_limits<double>::quiet_NaN();
        result.history.push_back(rec);
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Inference

std::vector<Detection> infer_detections(const AlignmentModel& model, const RegionSet& regions, Setting setting) {
    model.validate();
    if (regions.dim != model.visual_dim()) throw ShapeError("region feature dim does not match model");
    const auto indices = model.class_indices(setting == Setting::ZSD ? ClassSet::Unseen : ClassSet::All);
    const Eigen::MatrixXd cand = stack_candidates(model.class_weights(), model.background, indices);
    Eigen::VectorXd norms;
    const Eigen::MatrixXd unit = normalized_rows(cand, norms, "class embedding");
    const Index bg = static_cast<Index>(indices.size());

    std::vector<Detection> out;
    for (const auto& r : regions.regions) {
        const double fnorm = r.feature.norm();
        if (!(fnorm > 0.0)) throw std::invalid_argument("region feature has zero norm");
        const Eigen::VectorXd z = model.score_scale * (unit * (r.feature / fnorm));
        Index best = 0;
        for (Index c = 1; c < z.size(); ++c) {
            if (z(c) > z(best)) best = c;
        }
        if (best == bg) continue;
        const double denom = (z.array() - z(best)).exp().sum();
        out.push_back({r.image_id, r.box, model.class_names[indices[static_cast<std::size_t>(best)]], 1.0 / denom});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file

std::string format_model(const AlignmentModel& model) {
    model.validate();
    std::string out = "descreg-model v1\n";
    out += "source " + to_string(model.source) + "\n";
    out += "score_scale " + textio::format_real(model.score_scale) + "\n";
    io::append_classes(out, model.class_names, model.n_seen, model.class_inputs);
    io::append_head(out, model.head);
    out += "background " + std::to_string(model.background.size()) + "\n";
    io::append_row(out, model.background.transpose());
    return out;
}

AlignmentModel parse_model(std::istream& in) {
    io::LineReader rd(in, "model");
    if (rd.next() != "descreg-model v1") throw FormatError("expected header 'descreg-model v1'", 1);
    AlignmentModel model;
    model.source = rd.source();
    model.score_scale = rd.real(rd.keyed("score_scale", 1)[0]);
    rd.classes(model.class_names, model.n_seen, model.class_inputs);
    model.head = rd.head();
    const std::size_t bg = rd.integer(rd.keyed("background", 1)[0]);
    model.background = rd.row(bg).transpose();
    try {
        model.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("inconsistent model: ") + e.what());
    }
    return model;
}

AlignmentModel load_model(const std::string& path) {
    std::istringstream in(textio::read_file(path));
    try {
        return parse_model(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace descreg
