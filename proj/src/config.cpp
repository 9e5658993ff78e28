#include "descreg/config.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"

namespace descreg {

bool DataPaths::complete() const {
    return !catalog_dir.empty() && !train_regions.empty() && !test_regions.empty() && !test_gt.empty();
}

void RunConfig::resolve() {
    sim.seed = train.seed;
    synth.seed = train.seed;
    synth_classifier.seed = train.seed;
    const double lambda = synth.reg.lambda;
    synth.reg = train.reg;
    synth.reg.lambda = lambda;
}

std::string to_string(SamplingMode mode) { return mode == SamplingMode::TopPool ? "top_pool" : "proportional"; }

SamplingMode parse_sampling_mode(std::string_view text) {
    if (text == "top_pool") return SamplingMode::TopPool;
    if (text == "proportional") return SamplingMode::Proportional;
    throw std::invalid_argument("unknown sampling mode '" + std::string(text) + "'");
}

namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Entry {
    ConfigKey doc;
    Setter set;
    Getter get;
};

enum class Range { Any, NonNegative, Positive };

double to_real(std::string_view v, Range range) {
    auto x = textio::parse_real(v);
    if (!x || !std::isfinite(*x)) throw std::invalid_argument("expected a real number, got '" + std::string(v) + "'");
    if (range == Range::NonNegative && *x < 0.0) throw std::invalid_argument("value must be >= 0");
    if (range == Range::Positive && !(*x > 0.0)) throw std::invalid_argument("value must be > 0");
    return *x;
}

std::size_t to_count(std::string_view v, bool allow_zero) {
    auto x = textio::parse_integer(v);
    if (!x || *x < 0) throw std::invalid_argument("expected a non-negative integer, got '" + std::string(v) + "'");
    if (!allow_zero && *x == 0) throw std::invalid_argument("value must be positive");
    return static_cast<std::size_t>(*x);
}

bool to_bool(std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

// Accessors are generic lambdas returning a reference, usable on const and
// non-const configs alike.
template <typename Access>
Entry real(std::string key, std::string help, Access access, Range range = Range::Any) {
    return {{std::move(key), std::move(help)},
            [access, range](RunConfig& c, std::string_view v) { access(c) = to_real(v, range); },
            [access](const RunConfig& c) { return textio::format_real(access(c)); }};
}

template <typename Access>
Entry count(std::string key, std::string help, Access access, bool allow_zero = false) {
    return {{std::move(key), std::move(help)},
            [access, allow_zero](RunConfig& c, std::string_view v) { access(c) = to_count(v, allow_zero); },
            [access](const RunConfig& c) { return std::to_string(access(c)); }};
}

template <typename Access>
Entry flag(std::string key, std::string help, Access access) {
    return {{std::move(key), std::move(help)},
            [access](RunConfig& c, std::string_view v) { access(c) = to_bool(v); },
            [access](const RunConfig& c) { return std::string(access(c) ? "true" : "false"); }};
}

template <typename Access>
Entry text(std::string key, std::string help, Access access) {
    return {{std::move(key), std::move(help)},
            [access](RunConfig& c, std::string_view v) { access(c) = std::string(v); },
            [access](const RunConfig& c) { return access(c); }};
}

template <typename Access, typename Parse>
Entry choice(std::string key, std::string help, Access access, Parse parse) {
    return {{std::move(key), std::move(help)},
            [access, parse](RunConfig& c, std::string_view v) { access(c) = parse(v); },
            [access](const RunConfig& c) { return to_string(access(c)); }};
}

std::vector<RegMode> parse_mode_list(std::string_view v) {
    std::vector<RegMode> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const std::size_t comma = std::min(v.find(',', start), v.size());
        const auto item = textio::trim(v.substr(start, comma - start));
        if (item.empty()) throw std::invalid_argument("empty entry in mode list");
        out.push_back(parse_reg_mode(item));
        start = comma + 1;
    }
    return out;
}

std::string format_mode_list(const std::vector<RegMode>& modes) {
    std::string out;
    for (std::size_t i = 0; i < modes.size(); ++i) out += (i ? "," : "") + to_string(modes[i]);
    return out;
}

std::vector<Entry> build_entries() {
    std::vector<Entry> e;
    // trainer
    e.push_back(real("lr", "learning rate", [](auto& c) -> auto& { return c.train.lr; }, Range::NonNegative));
    e.push_back(real("momentum", "SGD momentum", [](auto& c) -> auto& { return c.train.momentum; }, Range::NonNegative));
    e.push_back(real("weight_decay", "L2 weight decay", [](auto& c) -> auto& { return c.train.weight_decay; }, Range::NonNegative));
    e.push_back(count("epochs", "training epochs", [](auto& c) -> auto& { return c.train.epochs; }, true));
    e.push_back(count("batch", "regions per mini-batch", [](auto& c) -> auto& { return c.train.batch; }));
    e.push_back({{"seed", "run seed; also seeds the scenario, synthesizer and classifier"},
                 [](RunConfig& c, std::string_view v) {
                     auto x = textio::parse_integer(v);
                     if (!x || *x < 0) throw std::invalid_argument("expected a non-negative integer seed");
                     c.train.seed = static_cast<std::uint64_t>(*x);
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    e.push_back({{"head.depth", "projection head depth (1-3)"},
                 [](RunConfig& c, std::string_view v) {
                     const auto d = to_count(v, false);
                     if (d > 3) throw std::invalid_argument("head depth must be 1, 2 or 3");
                     c.train.depth = d;
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.depth); }});
    e.push_back(count("head.hidden", "hidden width of deeper heads", [](auto& c) -> auto& { return c.train.hidden; }));
    e.push_back(real("score_scale", "multiplier on cosine scores", [](auto& c) -> auto& { return c.train.score_scale; }, Range::Positive));
    e.push_back(choice("embedding_source", "head input: semantic | description",
                       [](auto& c) -> auto& { return c.train.source; }, parse_embedding_source));
    // regularizer
    e.push_back(choice("reg.mode", "off | adaptive | fixed | diagonal | direct_l2",
                       [](auto& c) -> auto& { return c.train.reg.mode; }, parse_reg_mode));
    e.push_back(real("reg.tau", "softmax temperature over description similarity", [](auto& c) -> auto& { return c.train.reg.tau; }, Range::Positive));
    e.push_back(real("reg.fixed_margin", "margin of reg.mode = fixed", [](auto& c) -> auto& { return c.train.reg.fixed_margin; }, Range::NonNegative));
    e.push_back(count("reg.pos_pool", "positive pool size; 0 derives it from the class count", [](auto& c) -> auto& { return c.train.reg.pos_pool; }, true));
    e.push_back(count("reg.neg_pool", "negative pool size; 0 derives it from the class count", [](auto& c) -> auto& { return c.train.reg.neg_pool; }, true));
    e.push_back(real("reg.lambda", "weight of the regularizer", [](auto& c) -> auto& { return c.train.reg.lambda; }, Range::NonNegative));
    e.push_back({{"reg.seed", "extra seed mixed into triplet sampling"},
                 [](RunConfig& c, std::string_view v) {
                     auto x = textio::parse_integer(v);
                     if (!x || *x < 0) throw std::invalid_argument("expected a non-negative integer seed");
                     c.train.reg.seed = static_cast<std::uint64_t>(*x);
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.reg.seed); }});
    e.push_back(choice("reg.sampling", "top_pool | proportional",
                       [](auto& c) -> auto& { return c.train.reg.sampling; }, parse_sampling_mode));
    e.push_back(count("reg.triplets_per_class", "triplets per anchor per step", [](auto& c) -> auto& { return c.train.reg.triplets_per_class; }));
    e.push_back(flag("reg.include_unseen", "unseen classes act as anchors", [](auto& c) -> auto& { return c.train.reg.include_unseen; }));
    // scenario
    e.push_back(count("sim.n_seen", "seen classes", [](auto& c) -> auto& { return c.sim.n_seen; }));
    e.push_back(count("sim.n_unseen", "unseen classes", [](auto& c) -> auto& { return c.sim.n_unseen; }));
    e.push_back(count("sim.feature_dim", "region feature dimension", [](auto& c) -> auto& { return c.sim.feature_dim; }));
    e.push_back(count("sim.regions_per_class", "object regions per class", [](auto& c) -> auto& { return c.sim.regions_per_class; }));
    e.push_back(real("sim.noise_sigma", "expected norm of feature noise", [](auto& c) -> auto& { return c.sim.noise_sigma; }, Range::NonNegative));
    e.push_back(real("sim.background_fraction", "share of regions that are background", [](auto& c) -> auto& { return c.sim.background_fraction; }, Range::NonNegative));
    e.push_back(real("sim.box_jitter", "proposal jitter relative to box size", [](auto& c) -> auto& { return c.sim.box_jitter; }, Range::NonNegative));
    e.push_back(count("sim.images", "images per split", [](auto& c) -> auto& { return c.sim.images; }));
    e.push_back(count("sim.semantic_dim", "semantic embedding dimension", [](auto& c) -> auto& { return c.sim.semantic_dim; }));
    e.push_back(count("sim.description_dim", "description embedding dimension", [](auto& c) -> auto& { return c.sim.description_dim; }));
    e.push_back(real("sim.test_fraction", "share of seen regions held out", [](auto& c) -> auto& { return c.sim.test_fraction; }, Range::NonNegative));
    e.push_back(real("sim.mixed_fraction", "share of test objects on mixed images", [](auto& c) -> auto& { return c.sim.mixed_fraction; }, Range::NonNegative));
    e.push_back(real("sim.group_sim_min", "lowest within-group similarity", [](auto& c) -> auto& { return c.sim.group_sim_min; }));
    e.push_back(real("sim.group_sim_max", "highest within-group similarity", [](auto& c) -> auto& { return c.sim.group_sim_max; }));
    e.push_back(real("sim.cross_group_noise", "spread of cross-group similarity", [](auto& c) -> auto& { return c.sim.cross_group_noise; }, Range::NonNegative));
    e.push_back(real("sim.description_noise", "perturbation of description embeddings", [](auto& c) -> auto& { return c.sim.description_noise; }, Range::NonNegative));
    // synthesizer
    e.push_back(count("synth.noise_dim", "generator noise dimension", [](auto& c) -> auto& { return c.synth.noise_dim; }));
    e.push_back(count("synth.hidden", "generator hidden width", [](auto& c) -> auto& { return c.synth.hidden; }));
    e.push_back(count("synth.batch_per_class", "samples per class per step", [](auto& c) -> auto& { return c.synth.batch_per_class; }));
    e.push_back(count("synth.steps", "generator optimization steps", [](auto& c) -> auto& { return c.synth.steps; }, true));
    e.push_back(real("synth.lr", "generator learning rate", [](auto& c) -> auto& { return c.synth.lr; }, Range::NonNegative));
    e.push_back(real("synth.momentum", "generator SGD momentum", [](auto& c) -> auto& { return c.synth.momentum; }, Range::NonNegative));
    e.push_back(real("synth.weight_decay", "generator weight decay", [](auto& c) -> auto& { return c.synth.weight_decay; }, Range::NonNegative));
    e.push_back(real("synth.lambda", "weight of the triplet term on class means", [](auto& c) -> auto& { return c.synth.reg.lambda; }, Range::NonNegative));
    e.push_back(count("synth.samples_per_class", "synthesized features per class for the classifier", [](auto& c) -> auto& { return c.synth_classifier.samples_per_class; }));
    e.push_back(count("synth.classifier_epochs", "classifier epochs", [](auto& c) -> auto& { return c.synth_classifier.epochs; }, true));
    e.push_back(real("synth.classifier_lr", "classifier learning rate", [](auto& c) -> auto& { return c.synth_classifier.lr; }, Range::NonNegative));
    // reproduce
    e.push_back({{"reproduce.modes", "comma-separated regularizer modes to compare"},
                 [](RunConfig& c, std::string_view v) { c.reproduce.modes = parse_mode_list(v); },
                 [](const RunConfig& c) { return format_mode_list(c.reproduce.modes); }});
    e.push_back(count("reproduce.seeds", "seeds per mode, starting at the run seed", [](auto& c) -> auto& { return c.reproduce.seeds; }));
    e.push_back(flag("reproduce.synth", "also compare the synthesizer with and without the triplet term", [](auto& c) -> auto& { return c.reproduce.synth; }));
    e.push_back(real("reproduce.min_gap", "mean unseen mAP lead required by --check", [](auto& c) -> auto& { return c.reproduce.min_gap; }, Range::NonNegative));
    // data
    e.push_back(text("data.catalog_dir", "catalog directory; empty simulates the scenario", [](auto& c) -> auto& { return c.data.catalog_dir; }));
    e.push_back(text("data.train_regions", "training regions file", [](auto& c) -> auto& { return c.data.train_regions; }));
    e.push_back(text("data.test_regions", "test regions file", [](auto& c) -> auto& { return c.data.test_regions; }));
    e.push_back(text("data.test_gt", "test ground-truth file", [](auto& c) -> auto& { return c.data.test_gt; }));
    return e;
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = build_entries();
    return table;
}

const Entry* find_entry(std::string_view key) {
    for (const auto& e : entries()) {
        if (e.doc.key == key) return &e;
    }
    return nullptr;
}

void check_ranges(const RunConfig& c) {
    try {
        c.sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sim: ") + e.what());
    }
    if (c.reproduce.modes.empty()) throw ConfigError("reproduce.modes is empty");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) out.push_back(e.doc);
        return out;
    }();
    return keys;
}

void apply_config_value(RunConfig& config, std::string_view key, std::string_view value, std::size_t line) {
    const Entry* e = find_entry(key);
    if (!e) throw ConfigError("unknown key '" + std::string(key) + "'", line);
    try {
        e->set(config, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string(key) + ": " + err.what(), line);
    }
}

RunConfig parse_config(std::string_view text) {
    RunConfig config;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t, std::less<>> seen_at;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = textio::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
        const auto key = textio::trim(line.substr(0, eq));
        const auto value = textio::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("missing key", line_no);
        if (auto it = seen_at.find(key); it != seen_at.end()) {
            throw ConfigError("key '" + std::string(key) + "' already set on line " + std::to_string(it->second), line_no);
        }
        apply_config_value(config, key, value, line_no);
        seen_at.emplace(std::string(key), line_no);
    }
    config.resolve();
    check_ranges(config);
    return config;
}

RunConfig load_config(const std::string& path) { return parse_config(textio::read_file(path)); }

std::string format_config(const RunConfig& config) {
    std::string out;
    for (const auto& e : entries()) {
        out += "# " + e.doc.help + "\n";
        out += e.doc.key + " = " + e.get(config) + "\n";
    }
    return out;
}

}  // namespace descreg
