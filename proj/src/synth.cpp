#include "descreg/synth.hpp"

#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"
#include "model_io.hpp"

namespace descreg {

using Index = Eigen::Index;

void Synthesizer::validate() const {
    if (noise_dim == 0) throw std::invalid_argument("noise_dim must be positive");
    if (class_names.size() != static_cast<std::size_t>(class_inputs.rows())) {
        throw ShapeError("class input rows do not match class count");
    }
    if (n_seen > class_names.size()) throw std::invalid_argument("n_seen exceeds class count");
    if (generator.depth() == 0) throw ShapeError("generator has no layers");
    if (generator.input_dim() != embedding_dim() + noise_dim) {
        throw ShapeError("generator input dim must equal embedding dim + noise_dim");
    }
}

Eigen::VectorXd synthesize(const Synthesizer& synth, const Eigen::VectorXd& class_embedding,
                           const Eigen::VectorXd& noise) {
    if (static_cast<std::size_t>(class_embedding.size()) != synth.embedding_dim()) {
        throw ShapeError("class embedding dim does not match synthesizer");
    }
    if (static_cast<std::size_t>(noise.size()) != synth.noise_dim) throw ShapeError("noise dim does not match synthesizer");
    Eigen::MatrixXd input(1, class_embedding.size() + noise.size());
    input << class_embedding.transpose(), noise.transpose();
    return synth.generator.project(input).row(0).transpose();
}

namespace {

Eigen::MatrixXd gaussian(Index rows, Index cols, Rng& rng) {
    Eigen::MatrixXd out(rows, cols);
    // Row-major fill so the draw order does not depend on storage order.
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) out(r, c) = rng.normal();
    }
    return out;
}

// Generator inputs [c_j, z] for `per_class` rows of each class, class-major.
Eigen::MatrixXd generator_inputs(const Synthesizer& synth, const Eigen::MatrixXd& noise, std::size_t per_class) {
    const Index n = static_cast<Index>(synth.n_classes());
    const Index b = static_cast<Index>(per_class);
    if (noise.rows() != n * b || noise.cols() != static_cast<Index>(synth.noise_dim)) {
        throw ShapeError("noise must hold batch_per_class rows of noise_dim per class");
    }
    const Index e = static_cast<Index>(synth.embedding_dim());
    Eigen::MatrixXd x(n * b, e + noise.cols());
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < b; ++i) {
            x.row(j * b + i) << synth.class_inputs.row(j), noise.row(j * b + i);
        }
    }
    return x;
}

}  // namespace

Eigen::MatrixXd sample_features(const Synthesizer& synth, std::size_t class_index, std::size_t count, Rng& rng) {
    if (class_index >= synth.n_classes()) throw std::out_of_range("class index out of range");
    const Index e = static_cast<Index>(synth.embedding_dim());
    const Eigen::MatrixXd noise = gaussian(static_cast<Index>(count), static_cast<Index>(synth.noise_dim), rng);
    Eigen::MatrixXd x(static_cast<Index>(count), e + noise.cols());
    for (Index i = 0; i < x.rows(); ++i) x.row(i) << synth.class_inputs.row(static_cast<Index>(class_index)), noise.row(i);
    return synth.generator.project(x);
}

Eigen::MatrixXd seen_class_means(const LabeledFeatures& data, std::size_t n_seen) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Index>(n_seen), data.features.cols());
    std::vector<std::size_t> counts(n_seen, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int label = data.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= n_seen) continue;
        sums.row(label) += data.features.row(static_cast<Index>(i));
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t j = 0; j < n_seen; ++j) {
        if (counts[j] == 0) throw std::invalid_argument("seen class " + std::to_string(j) + " has no regions");
        sums.row(static_cast<Index>(j)) /= static_cast<double>(counts[j]);
    }
    return sums;
}

SynthObjective synth_objective(const Synthesizer& synth, const Eigen::MatrixXd& real_means, const Eigen::MatrixXd& noise,
                               std::size_t batch_per_class, const Regularizer* regularizer, Rng& rng) {
    if (batch_per_class == 0) throw std::invalid_argument("batch_per_class must be positive");
    if (real_means.rows() != static_cast<Index>(synth.n_seen) ||
        real_means.cols() != static_cast<Index>(synth.visual_dim())) {
        throw ShapeError("real means must be n_seen x visual dim");
    }
    const Index n = static_cast<Index>(synth.n_classes());
    const Index b = static_cast<Index>(batch_per_class);
    const Index s = static_cast<Index>(synth.n_seen);

    ProjectionHead::Trace trace;
    const Eigen::MatrixXd out = synth.generator.forward(generator_inputs(synth, noise, batch_per_class), trace);

    SynthObjective obj;
    obj.class_means.resize(n, out.cols());
    for (Index j = 0; j < n; ++j) obj.class_means.row(j) = out.middleRows(j * b, b).colwise().mean();

    Eigen::MatrixXd d_means = Eigen::MatrixXd::Zero(n, out.cols());
    const Eigen::MatrixXd diff = obj.class_means.topRows(s) - real_means;
    obj.moment = diff.squaredNorm();
    d_means.topRows(s) = 2.0 * diff;

    if (regularizer && regularizer->config().mode != RegMode::Off) {
        obj.lambda = regularizer->config().lambda;
        const LossValue reg = regularizer->evaluate(obj.class_means, rng);
        obj.reg = reg.value;
        d_means += obj.lambda * reg.grad;
    }

    Eigen::MatrixXd d_out(out.rows(), out.cols());
    for (Index j = 0; j < n; ++j) {
        d_out.middleRows(j * b, b) = (d_means.row(j) / static_cast<double>(b)).replicate(b, 1);
    }
    obj.grad = Eigen::VectorXd::Zero(static_cast<Index>(synth.generator.parameter_count()));
    synth.generator.backward(trace, d_out, std::span<double>(obj.grad.data(), static_cast<std::size_t>(obj.grad.size())));
    return obj;
}

SynthResult train_synthesizer(const ClassCatalog& catalog, const LabeledFeatures& train, const SynthConfig& config) {
    if (config.noise_dim == 0) throw std::invalid_argument("noise_dim must be positive");
    if (config.batch_per_class == 0) throw std::invalid_argument("batch_per_class must be positive");
    if (train.size() == 0) throw std::invalid_argument("empty training set");
    const Eigen::MatrixXd real_means = seen_class_means(train, catalog.n_seen());

    Rng init_rng(mix_seed(config.seed, 11));
    Rng noise_rng(mix_seed(config.seed, 12));
    Rng reg_rng(mix_seed(config.seed ^ mix_seed(config.reg.seed, 7), 13));

    Synthesizer synth;
    synth.noise_dim = config.noise_dim;
    synth.source = config.source;
    synth.class_names = catalog.names();
    synth.n_seen = catalog.n_seen();
    synth.class_inputs = class_inputs_for(catalog, config.source);
    synth.generator = ProjectionHead::random(synth.embedding_dim() + config.noise_dim,
                                             static_cast<std::size_t>(train.features.cols()), 2, config.hidden, init_rng);

    std::optional<Regularizer> regularizer;
    if (config.reg.mode != RegMode::Off && config.reg.lambda != 0.0) regularizer.emplace(config.reg, catalog);

    SgdMomentum opt{config.lr, config.momentum, config.weight_decay, {}};
    Eigen::VectorXd params(static_cast<Index>(synth.generator.parameter_count()));
    synth.generator.pack(std::span<double>(params.data(), static_cast<std::size_t>(params.size())));

    SynthResult result;
    const Index rows = static_cast<Index>(synth.n_classes() * config.batch_per_class);
    for (std::size_t step = 1; step <= config.steps; ++step) {
        const Eigen::MatrixXd noise = gaussian(rows, static_cast<Index>(config.noise_dim), noise_rng);
        const SynthObjective obj = synth_objective(synth, real_means, noise, config.batch_per_class,
                                                   regularizer ? &*regularizer : nullptr, reg_rng);
        opt.step(params, obj.grad);
        synth.generator.unpack(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
        if (step % 50 == 0 || step == config.steps) result.history.push_back({step, obj.moment, obj.reg});
    }
    result.synth = std::move(synth);
    return result;
}

AlignmentModel train_classifier_from_synth(const Synthesizer& synth, const LabeledFeatures& background,
                                           const SynthClassifierConfig& config) {
    synth.validate();
    if (config.samples_per_class == 0) throw std::invalid_argument("samples_per_class must be positive");
    if (config.batch == 0) throw std::invalid_argument("batch size must be positive");
    if (background.size() > 0 && background.features.cols() != static_cast<Index>(synth.visual_dim())) {
        throw ShapeError("background feature dim does not match synthesizer");
    }

    Rng sample_rng(mix_seed(config.seed, 21));
    Rng init_rng(mix_seed(config.seed, 22));
    Rng shuffle_rng(mix_seed(config.seed, 23));

    const std::size_t n = synth.n_classes();
    const Index d = static_cast<Index>(synth.visual_dim());
    std::size_t n_bg = 0;
    for (int label : background.labels) n_bg += label == LabeledFeatures::kBackgroundIndex;

    LabeledFeatures data;
    data.features.resize(static_cast<Index>(n * config.samples_per_class + n_bg), d);
    Index row = 0;
    for (std::size_t j = 0; j < n; ++j) {
        data.features.middleRows(row, static_cast<Index>(config.samples_per_class)) =
            sample_features(synth, j, config.samples_per_class, sample_rng);
        row += static_cast<Index>(config.samples_per_class);
        data.labels.insert(data.labels.end(), config.samples_per_class, static_cast<int>(j));
    }
    for (std::size_t i = 0; i < background.size(); ++i) {
        if (background.labels[i] != LabeledFeatures::kBackgroundIndex) continue;
        data.features.row(row++) = background.features.row(static_cast<Index>(i));
        data.labels.push_back(LabeledFeatures::kBackgroundIndex);
    }

    AlignmentModel model;
    model.source = EmbeddingSource::OneHot;
    model.class_names = synth.class_names;
    model.n_seen = synth.n_seen;
    model.class_inputs = Eigen::MatrixXd::Identity(static_cast<Index>(n), static_cast<Index>(n));
    model.score_scale = config.score_scale;
    model.head = ProjectionHead::random(n, static_cast<std::size_t>(d), 1, 0, init_rng);
    model.background.resize(d);
    for (Index i = 0; i < d; ++i) model.background(i) = init_rng.normal(0.0, 0.01);

    SgdMomentum opt{config.lr, config.momentum, config.weight_decay, {}};
    Eigen::VectorXd params = model.parameters();
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            LabeledFeatures batch;
            batch.features.resize(static_cast<Index>(end - start), d);
            for (std::size_t i = start; i < end; ++i) {
                batch.features.row(static_cast<Index>(i - start)) = data.features.row(static_cast<Index>(order[i]));
                batch.labels.push_back(data.labels[order[i]]);
            }
            const ModelLoss loss = classification_loss(model, batch, ClassSet::All);
            opt.step(params, loss.grad);
            model.set_parameters(params);
        }
    }
    return model;
}

std::string format_synth(const Synthesizer& synth) {
    synth.validate();
    std::string out = "descreg-synth v1\n";
    out += "source " + to_string(synth.source) + "\n";
    out += "noise_dim " + std::to_string(synth.noise_dim) + "\n";
    io::append_classes(out, synth.class_names, synth.n_seen, synth.class_inputs);
    io::append_head(out, synth.generator);
    return out;
}

Synthesizer parse_synth(std::istream& in) {
    io::LineReader rd(in, "synthesizer");
    if (rd.next() != "descreg-synth v1") throw FormatError("expected header 'descreg-synth v1'", 1);
    Synthesizer synth;
    synth.source = rd.source();
    synth.noise_dim = rd.integer(rd.keyed("noise_dim", 1)[0]);
    rd.classes(synth.class_names, synth.n_seen, synth.class_inputs);
    synth.generator = rd.head();
    try {
        synth.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("inconsistent synthesizer: ") + e.what());
    }
    return synth;
}

Synthesizer load_synth(const std::string& path) {
    std::istringstream in(textio::read_file(path));
    try {
        return parse_synth(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace descreg
