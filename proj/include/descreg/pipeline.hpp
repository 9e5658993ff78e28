#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "descreg/config.hpp"
#include "descreg/detmetrics.hpp"
#include "descreg/simdata.hpp"

namespace descreg {

/// A failure inside one pipeline stage; what() starts with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Loads the configured data files, or simulates the scenario when the
/// paths are not all set.
Dataset prepare_dataset(const RunConfig& config);

/// One trained-and-evaluated variant on one seed.
struct RunResult {
    std::string variant;  // regularizer mode, or synth-lambda0 / synth-lambda<k>
    std::uint64_t seed = 0;
    EvalReport zsd;
    EvalReport gzsd;
    double seen_accuracy = 0.0;
    double unseen_accuracy = 0.0;
    TrainHistory history;  // empty for synthesizer variants
};

/// Mean metrics of a variant over seeds.
struct VariantSummary {
    std::string variant;
    std::size_t runs = 0;
    double zsd_map = 0.0;
    double zsd_recall = 0.0;  // recall@k at IoU 0.5
    double gzsd_seen_map = 0.0;
    double gzsd_unseen_map = 0.0;
    double gzsd_hm = 0.0;
    double gzsd_recall_hm = 0.0;  // at IoU 0.5
    double unseen_accuracy = 0.0;
};

struct ReproduceResult {
    std::vector<RunResult> runs;             // seed-major, variants in config order
    std::vector<VariantSummary> summary;     // variants in config order
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains, infers and evaluates one regularizer mode on a prepared dataset.
RunResult run_mode(const Dataset& data, const RunConfig& config, RegMode mode);

/// Synthesizer classifier with the configured synth.lambda (or zero when
/// `lambda_off` is set).
RunResult run_synth(const Dataset& data, const RunConfig& config, bool lambda_off);

/// Every configured mode on seeds seed .. seed + reproduce.seeds - 1. When
/// `out_dir` is non-empty the comparison and per-run files are written there.
ReproduceResult reproduce(const RunConfig& config, const std::string& out_dir, const ProgressFn& progress = {});

std::vector<VariantSummary> summarize(const std::vector<RunResult>& runs, const std::vector<std::string>& order);

/// Fixed-width comparison table, one row per variant (metrics in percent).
std::string format_comparison_table(const std::vector<VariantSummary>& summary);
std::string format_comparison_csv(const std::vector<VariantSummary>& summary);
std::string format_runs_csv(const std::vector<RunResult>& runs);

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// The pass/fail criteria of `reproduce --check`: adaptive beats off on ZSD
/// mAP, and beats every other compared mode on GZSD unseen mAP by at least
/// reproduce.min_gap. Comparisons against modes not run are skipped.
std::vector<CheckLine> check_reproduction(const ReproduceResult& result, const RunConfig& config);

}  // namespace descreg
