#include "descreg/pipeline.hpp"

#include <cstdio>
#include <filesystem>

#include "descreg/error.hpp"
#include "descreg/regions.hpp"
#include "descreg/textio.hpp"

namespace descreg {

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

double at_half(const std::map<double, double>& by_iou) {
    auto it = by_iou.find(0.5);
    return it == by_iou.end() ? 0.0 : it->second;
}

RunResult evaluate_model(const Dataset& data, const AlignmentModel& model, const LabeledFeatures& test,
                         std::string variant, std::uint64_t seed) {
    RunResult r;
    r.variant = std::move(variant);
    r.seed = seed;
    const auto zsd = in_stage("infer", [&] { return infer_detections(model, data.test, Setting::ZSD); });
    const auto gzsd = in_stage("infer", [&] { return infer_detections(model, data.test, Setting::GZSD); });
    in_stage("eval", [&] {
        r.zsd = evaluate(zsd, data.test_gt, data.catalog.split, Setting::ZSD);
        r.gzsd = evaluate(gzsd, data.test_gt, data.catalog.split, Setting::GZSD);
        r.seen_accuracy = seen_accuracy(model, test);
        r.unseen_accuracy = unseen_accuracy(model, test);
        return 0;
    });
    return r;
}

std::string pct(double v) { return textio::format_fixed(100.0 * v, 2); }

std::string pad(std::string s, std::size_t width, bool left) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return left ? s + fill : fill + s;
}

}  // namespace

Dataset prepare_dataset(const RunConfig& config) {
    const DataPaths& p = config.data;
    const bool any = !p.catalog_dir.empty() || !p.train_regions.empty() || !p.test_regions.empty() || !p.test_gt.empty();
    if (!any) return in_stage("simulate", [&] { return generate_dataset(config.sim); });
    if (!p.complete()) throw ConfigError("data.catalog_dir, data.train_regions, data.test_regions and data.test_gt must be set together");
    return in_stage("load", [&] {
        Dataset d;
        d.catalog = load_catalog_dir(p.catalog_dir);
        d.train = load_regions(p.train_regions);
        d.test = load_regions(p.test_regions);
        d.test_gt = load_ground_truth(p.test_gt);
        return d;
    });
}

RunResult run_mode(const Dataset& data, const RunConfig& config, RegMode mode) {
    TrainConfig tc = config.train;
    tc.reg.mode = mode;
    const auto train = in_stage("train", [&] { return label_regions(data.train, data.catalog.names()); });
    const auto test = in_stage("eval", [&] { return label_regions(data.test, data.catalog.names()); });
    auto trained = in_stage("train", [&] { return train_alignment(data.catalog, train, tc, &test); });
    RunResult r = evaluate_model(data, trained.model, test, to_string(mode), tc.seed);
    r.history = std::move(trained.history);
    return r;
}

RunResult run_synth(const Dataset& data, const RunConfig& config, bool lambda_off) {
    SynthConfig sc = config.synth;
    if (lambda_off) sc.reg.lambda = 0.0;
    const auto train = in_stage("synth-train", [&] { return label_regions(data.train, data.catalog.names()); });
    const auto test = in_stage("eval", [&] { return label_regions(data.test, data.catalog.names()); });
    const auto synth = in_stage("synth-train", [&] { return train_synthesizer(data.catalog, train, sc).synth; });
    const auto model = in_stage("synth-classify", [&] { return train_classifier_from_synth(synth, train, config.synth_classifier); });
    return evaluate_model(data, model, test, "synth-lambda" + textio::format_real(sc.reg.lambda), sc.seed);
}

std::vector<VariantSummary> summarize(const std::vector<RunResult>& runs, const std::vector<std::string>& order) {
    std::vector<VariantSummary> out;
    for (const auto& name : order) {
        VariantSummary s;
        s.variant = name;
        for (const auto& r : runs) {
            if (r.variant != name) continue;
            ++s.runs;
            s.zsd_map += r.zsd.unseen.map;
            s.zsd_recall += at_half(r.zsd.unseen.recall);
            s.gzsd_seen_map += r.gzsd.seen.map;
            s.gzsd_unseen_map += r.gzsd.unseen.map;
            s.gzsd_hm += r.gzsd.map_hm;
            s.gzsd_recall_hm += at_half(r.gzsd.recall_hm);
            s.unseen_accuracy += r.unseen_accuracy;
        }
        if (s.runs) {
            const double k = static_cast<double>(s.runs);
            s.zsd_map /= k;
            s.zsd_recall /= k;
            s.gzsd_seen_map /= k;
            s.gzsd_unseen_map /= k;
            s.gzsd_hm /= k;
            s.gzsd_recall_hm /= k;
            s.unseen_accuracy /= k;
        }
        out.push_back(s);
    }
    return out;
}

ReproduceResult reproduce(const RunConfig& config, const std::string& out_dir, const ProgressFn& progress) {
    if (config.reproduce.modes.empty()) throw ConfigError("reproduce.modes is empty");
    ReproduceResult result;
    std::vector<std::string> order;
    for (RegMode m : config.reproduce.modes) order.push_back(to_string(m));
    if (config.reproduce.synth) {
        order.push_back("synth-lambda0");
        order.push_back("synth-lambda" + textio::format_real(config.synth.reg.lambda));
    }

    for (std::size_t i = 0; i < config.reproduce.seeds; ++i) {
        RunConfig cfg = config;
        cfg.train.seed = config.train.seed + i;
        cfg.resolve();
        if (progress) progress("seed " + std::to_string(cfg.train.seed) + ": preparing data");
        const Dataset data = prepare_dataset(cfg);
        for (RegMode m : cfg.reproduce.modes) {
            if (progress) progress("seed " + std::to_string(cfg.train.seed) + ": " + to_string(m));
            result.runs.push_back(run_mode(data, cfg, m));
        }
        if (cfg.reproduce.synth) {
            if (progress) progress("seed " + std::to_string(cfg.train.seed) + ": synthesizer");
            result.runs.push_back(run_synth(data, cfg, true));
            result.runs.push_back(run_synth(data, cfg, false));
        }
    }
    result.summary = summarize(result.runs, order);

    if (!out_dir.empty()) {
        in_stage("report", [&] {
            namespace fs = std::filesystem;
            fs::create_directories(fs::path(out_dir) / "history");
            textio::write_file((fs::path(out_dir) / "config.txt").string(), format_config(config));
            textio::write_file((fs::path(out_dir) / "comparison.txt").string(), format_comparison_table(result.summary));
            textio::write_file((fs::path(out_dir) / "comparison.csv").string(), format_comparison_csv(result.summary));
            textio::write_file((fs::path(out_dir) / "runs.csv").string(), format_runs_csv(result.runs));
            for (const auto& r : result.runs) {
                if (r.history.empty()) continue;
                const auto name = r.variant + "-seed" + std::to_string(r.seed) + ".csv";
                textio::write_file((fs::path(out_dir) / "history" / name).string(), format_history_csv(r.history));
            }
            return 0;
        });
    }
    return result;
}

std::string format_comparison_table(const std::vector<VariantSummary>& summary) {
    const std::vector<std::string> head{"variant", "runs", "zsd_map", "zsd_re@100", "gzsd_seen", "gzsd_unseen", "gzsd_hm",
                                        "gzsd_re_hm", "unseen_acc"};
    std::vector<std::vector<std::string>> rows{head};
    for (const auto& s : summary) {
        rows.push_back({s.variant, std::to_string(s.runs), pct(s.zsd_map), pct(s.zsd_recall), pct(s.gzsd_seen_map),
                        pct(s.gzsd_unseen_map), pct(s.gzsd_hm), pct(s.gzsd_recall_hm), pct(s.unseen_accuracy)});
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::string out;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) out += "  ";
            out += pad(r[c], width[c], c == 0);
        }
        out += '\n';
    }
    return out;
}

std::string format_comparison_csv(const std::vector<VariantSummary>& summary) {
    std::string out = "variant,runs,zsd_map,zsd_recall,gzsd_seen_map,gzsd_unseen_map,gzsd_hm,gzsd_recall_hm,unseen_accuracy\n";
    for (const auto& s : summary) {
        out += s.variant + ',' + std::to_string(s.runs) + ',' + textio::format_real(s.zsd_map) + ',' +
               textio::format_real(s.zsd_recall) + ',' + textio::format_real(s.gzsd_seen_map) + ',' +
               textio::format_real(s.gzsd_unseen_map) + ',' + textio::format_real(s.gzsd_hm) + ',' +
               textio::format_real(s.gzsd_recall_hm) + ',' + textio::format_real(s.unseen_accuracy) + '\n';
    }
    return out;
}

std::string format_runs_csv(const std::vector<RunResult>& runs) {
    std::string out = "variant,seed,zsd_map,gzsd_seen_map,gzsd_unseen_map,gzsd_hm,seen_accuracy,unseen_accuracy\n";
    for (const auto& r : runs) {
        out += r.variant + ',' + std::to_string(r.seed) + ',' + textio::format_real(r.zsd.unseen.map) + ',' +
               textio::format_real(r.gzsd.seen.map) + ',' + textio::format_real(r.gzsd.unseen.map) + ',' +
               textio::format_real(r.gzsd.map_hm) + ',' + textio::format_real(r.seen_accuracy) + ',' +
               textio::format_real(r.unseen_accuracy) + '\n';
    }
    return out;
}

std::vector<CheckLine> check_reproduction(const ReproduceResult& result, const RunConfig& config) {
    const auto find = [&](const std::string& name) -> const VariantSummary* {
        for (const auto& s : result.summary) {
            if (s.variant == name && s.runs > 0) return &s;
        }
        return nullptr;
    };
    std::vector<CheckLine> out;
    const VariantSummary* adaptive = find("adaptive");
    if (!adaptive) {
        out.push_back({"adaptive mode present", false, "reproduce.modes does not include adaptive"});
        return out;
    }
    if (const auto* off = find("off")) {
        out.push_back({"zsd map: adaptive > off", adaptive->zsd_map > off->zsd_map,
                       pct(adaptive->zsd_map) + " vs " + pct(off->zsd_map)});
    }
    const double gap = config.reproduce.min_gap;
    for (const char* other : {"off", "diagonal", "direct_l2", "fixed"}) {
        const auto* s = find(other);
        if (!s) continue;
        out.push_back({std::string("gzsd unseen map: adaptive >= ") + other + " + " + textio::format_real(gap),
                       adaptive->gzsd_unseen_map >= s->gzsd_unseen_map + gap,
                       pct(adaptive->gzsd_unseen_map) + " vs " + pct(s->gzsd_unseen_map)});
    }
    if (config.reproduce.synth) {
        const auto* base = find("synth-lambda0");
        const auto* reg = find("synth-lambda" + textio::format_real(config.synth.reg.lambda));
        if (base && reg && reg != base) {
            out.push_back({"synth unseen accuracy: lambda > 0 >= lambda = 0", reg->unseen_accuracy >= base->unseen_accuracy,
                           pct(reg->unseen_accuracy) + " vs " + pct(base->unseen_accuracy)});
        }
    }
    return out;
}

}  // namespace descreg
