// descreg command-line tool.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "descreg/config.hpp"
#include "descreg/detmetrics.hpp"
#include "descreg/error.hpp"
#include "descreg/pipeline.hpp"
#include "descreg/prep.hpp"
#include "descreg/similarity.hpp"
#include "descreg/simdata.hpp"
#include "descreg/synth.hpp"
#include "descreg/textio.hpp"

namespace fs = std::filesystem;
using namespace descreg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kCheckFailed = 3 };

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir;
    bool quiet = false;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RunConfig load_run_config(const Globals& g) {
    RunConfig config = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    if (g.seed) config.train.seed = *g.seed;
    config.resolve();
    return config;
}

// Explicit --out wins; otherwise <out-dir>/<fallback>; otherwise stdout.
std::string output_path(const std::string& out, const Globals& g, const std::string& fallback) {
    if (!out.empty()) return out;
    if (!g.out_dir.empty()) return (fs::path(g.out_dir) / fallback).string();
    return "-";
}

void emit(const std::string& path, const std::string& contents) {
    if (path == "-") {
        std::cout << contents;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    textio::write_file(path, contents);
}

void note(const Globals& g, const std::string& text) {
    if (!g.quiet) std::cerr << text << '\n';
}

std::string require_dir(const std::string& dir, const Globals& g, const char* what) {
    if (!dir.empty()) return dir;
    if (!g.out_dir.empty()) return g.out_dir;
    throw UsageError(std::string(what) + " needs --out-dir");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Description-similarity regularized zero-shot detection heads"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Run seed (overrides the config file)");
    app.add_option("--config", g.config_path, "Run configuration file (key = value)");
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_flag("--quiet", g.quiet, "Suppress progress messages");

    auto* sim = app.add_subcommand("sim", "Export the normalized description similarity matrix");
    std::string sim_embeddings, sim_out;
    std::optional<double> sim_tau;
    bool sim_raw = false;
    sim->add_option("--embeddings", sim_embeddings, "Description embedding file")->required()->check(CLI::ExistingFile);
    sim->add_option("--tau", sim_tau, "Softmax temperature (defaults to reg.tau)");
    sim->add_flag("--raw", sim_raw, "Export the raw cosine matrix instead");
    sim->add_option("--out", sim_out, "CSV output");

    auto* simulate = app.add_subcommand("simulate", "Write a synthetic catalog, regions and ground truth");
    std::string simulate_dir;
    simulate->add_option("--dir", simulate_dir, "Output directory (defaults to --out-dir)");

    auto* split = app.add_subcommand("split", "Seen/unseen split by clustering class embeddings");
    std::string split_embeddings, split_out;
    std::size_t split_n_unseen = 0;
    split->add_option("--embeddings", split_embeddings, "Embedding file")->required()->check(CLI::ExistingFile);
    split->add_option("--n-unseen", split_n_unseen, "Number of unseen classes")->required();
    split->add_option("--out", split_out, "Split file");

    auto* crop = app.add_subcommand("crop-plan", "Plan 800-pixel crops of a large image");
    long crop_w = 0, crop_h = 0, crop_patch = kDefaultPatch;
    std::string crop_out;
    crop->add_option("--width", crop_w, "Image width")->required();
    crop->add_option("--height", crop_h, "Image height")->required();
    crop->add_option("--patch", crop_patch, "Patch size");
    crop->add_option("--out", crop_out, "CSV output");

    auto* train = app.add_subcommand("train", "Train the projection head and background vector");
    std::string train_catalog, train_regions, train_validation, train_out, train_history;
    train->add_option("--catalog-dir", train_catalog, "Catalog directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--regions", train_regions, "Training regions")->required()->check(CLI::ExistingFile);
    train->add_option("--validation", train_validation, "Held-out regions for per-epoch accuracy")->check(CLI::ExistingFile);
    train->add_option("--out", train_out, "Model file");
    train->add_option("--history", train_history, "Per-epoch CSV");

    auto* infer = app.add_subcommand("infer", "Score regions and emit detections");
    std::string infer_model, infer_regions, infer_setting = "gzsd", infer_out;
    infer->add_option("--model", infer_model, "Model file")->required()->check(CLI::ExistingFile);
    infer->add_option("--regions", infer_regions, "Regions to score")->required()->check(CLI::ExistingFile);
    infer->add_option("--setting", infer_setting, "zsd or gzsd")->check(CLI::IsMember({"zsd", "gzsd"}));
    infer->add_option("--out", infer_out, "Detections file");

    auto* synth_train = app.add_subcommand("synth-train", "Train the feature synthesizer");
    std::string st_catalog, st_regions, st_out;
    synth_train->add_option("--catalog-dir", st_catalog, "Catalog directory")->required()->check(CLI::ExistingDirectory);
    synth_train->add_option("--regions", st_regions, "Training regions")->required()->check(CLI::ExistingFile);
    synth_train->add_option("--out", st_out, "Synthesizer file");

    auto* synth_classify = app.add_subcommand("synth-classify", "Train a classifier on synthesized features");
    std::string sc_synth, sc_regions, sc_out;
    synth_classify->add_option("--synth", sc_synth, "Synthesizer file")->required()->check(CLI::ExistingFile);
    synth_classify->add_option("--regions", sc_regions, "Regions supplying background features")->check(CLI::ExistingFile);
    synth_classify->add_option("--out", sc_out, "Model file");

    auto* eval = app.add_subcommand("eval", "Evaluate detections against ground truth");
    std::string ev_dets, ev_gt, ev_split, ev_catalog, ev_setting = "gzsd", ev_out, ev_ap;
    double ev_iou = 0.5;
    std::size_t ev_k = 100;
    eval->add_option("--dets,--detections", ev_dets, "Detections file")->required()->check(CLI::ExistingFile);
    eval->add_option("--gt", ev_gt, "Ground-truth file")->required()->check(CLI::ExistingFile);
    eval->add_option("--split", ev_split, "Split file")->check(CLI::ExistingFile);
    eval->add_option("--catalog-dir", ev_catalog, "Catalog directory (its split.txt is used)")->check(CLI::ExistingDirectory);
    eval->add_option("--setting", ev_setting, "zsd or gzsd")->check(CLI::IsMember({"zsd", "gzsd"}));
    eval->add_option("--iou", ev_iou, "IoU threshold for AP");
    eval->add_option("--k", ev_k, "Detections kept per image for recall");
    eval->add_option("--report,--out", ev_out, "Report file");
    eval->add_option("--ap-csv", ev_ap, "Per-class AP CSV");

    auto* repro = app.add_subcommand("reproduce", "Simulate, train each regularizer mode, infer and evaluate");
    bool repro_check = false;
    repro->add_flag("--check", repro_check, "Exit with status 3 unless the comparison criteria hold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    if (seed_opt->count()) g.seed = seed_value;

    try {
        const RunConfig config = load_run_config(g);

        if (sim->parsed()) {
            const EmbeddingSet emb = load_embedding_file(sim_embeddings);
            const SimilarityMatrix m = description_similarity(emb, sim_tau.value_or(config.train.reg.tau));
            emit(output_path(sim_out, g, "similarity.csv"), format_similarity_csv(emb.names, sim_raw ? m.raw : m.normalized));
        } else if (simulate->parsed()) {
            const std::string dir = require_dir(simulate_dir, g, "simulate");
            fs::create_directories(dir);
            save_dataset(generate_dataset(config.sim), dir);
            note(g, "wrote scenario to " + dir);
        } else if (split->parsed()) {
            const EmbeddingSet emb = load_embedding_file(split_embeddings);
            Rng rng(mix_seed(config.train.seed, 31));
            emit(output_path(split_out, g, "split.txt"), format_split_file(cluster_split(emb, split_n_unseen, rng)));
        } else if (crop->parsed()) {
            if (crop_w <= 0 || crop_h <= 0 || crop_patch <= 0) throw UsageError("width, height and patch must be positive");
            emit(output_path(crop_out, g, "crops.csv"), format_crop_csv(crop_plan(crop_w, crop_h, crop_patch)));
        } else if (train->parsed()) {
            std::vector<std::string> warnings;
            const ClassCatalog catalog = load_catalog_dir(train_catalog, &warnings);
            for (const auto& w : warnings) note(g, "warning: " + w);
            const LabeledFeatures data = label_regions(load_regions(train_regions), catalog.names());
            std::optional<LabeledFeatures> validation;
            if (!train_validation.empty()) validation = label_regions(load_regions(train_validation), catalog.names());
            const TrainResult result = train_alignment(catalog, data, config.train, validation ? &*validation : nullptr);
            emit(output_path(train_out, g, "model.txt"), format_model(result.model));
            if (!train_history.empty() || !g.out_dir.empty()) {
                emit(output_path(train_history, g, "history.csv"), format_history_csv(result.history));
            }
            note(g, "trained " + std::to_string(result.history.size()) + " epochs, final cls loss " +
                        textio::format_fixed(result.history.empty() ? 0.0 : result.history.back().cls_loss, 4));
        } else if (infer->parsed()) {
            const AlignmentModel model = load_model(infer_model);
            const auto dets = infer_detections(model, load_regions(infer_regions), parse_setting(infer_setting));
            emit(output_path(infer_out, g, "detections-" + infer_setting + ".txt"), format_detections(dets));
            note(g, std::to_string(dets.size()) + " detections");
        } else if (synth_train->parsed()) {
            const ClassCatalog catalog = load_catalog_dir(st_catalog);
            const LabeledFeatures data = label_regions(load_regions(st_regions), catalog.names());
            const SynthResult result = train_synthesizer(catalog, data, config.synth);
            emit(output_path(st_out, g, "synth.txt"), format_synth(result.synth));
            if (!result.history.empty()) {
                note(g, "final moment loss " + textio::format_fixed(result.history.back().moment, 6) + ", regularizer " +
                            textio::format_fixed(result.history.back().reg, 6));
            }
        } else if (synth_classify->parsed()) {
            const Synthesizer synth = load_synth(sc_synth);
            LabeledFeatures background;
            if (!sc_regions.empty()) background = label_regions(load_regions(sc_regions), synth.class_names);
            const AlignmentModel model = train_classifier_from_synth(synth, background, config.synth_classifier);
            emit(output_path(sc_out, g, "synth-model.txt"), format_model(model));
        } else if (eval->parsed()) {
            ClassSplit cls_split;
            if (!ev_split.empty()) {
                cls_split = load_split_file(ev_split);
            } else if (!ev_catalog.empty()) {
                cls_split = load_split_file((fs::path(ev_catalog) / kSplitFile).string());
            } else {
                throw UsageError("eval needs --split or --catalog-dir");
            }
            EvalOptions options;
            options.iou = ev_iou;
            options.k = ev_k;
            const auto report = evaluate(load_detections(ev_dets), load_ground_truth(ev_gt), cls_split,
                                         parse_setting(ev_setting), options);
            emit(output_path(ev_out, g, "report-" + ev_setting + ".txt"), format_report(report));
            if (!ev_ap.empty()) emit(ev_ap, format_ap_csv(report, cls_split));
        } else if (repro->parsed()) {
            const auto result = reproduce(config, g.out_dir, [&](const std::string& m) { note(g, m); });
            std::cout << format_comparison_table(result.summary);
            if (repro_check) {
                const auto lines = check_reproduction(result, config);
                bool ok = true;
                std::string text;
                for (const auto& l : lines) {
                    ok = ok && l.pass;
                    text += std::string(l.pass ? "PASS  " : "FAIL  ") + l.name + "  (" + l.detail + ")\n";
                }
                std::cout << text;
                if (!g.out_dir.empty()) emit((fs::path(g.out_dir) / "check.txt").string(), text);
                if (!ok) return kCheckFailed;
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
