#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "descreg/alignment.hpp"
#include "descreg/simdata.hpp"
#include "descreg/synth.hpp"

namespace descreg {

struct ReproduceConfig {
    std::vector<RegMode> modes{RegMode::Off, RegMode::Diagonal, RegMode::DirectL2, RegMode::Adaptive};
    std::size_t seeds = 5;
    /// Also compare the synthesizer classifier with and without the triplet term.
    bool synth = false;
    /// Least mean advantage in unseen mAP that `reproduce --check` accepts.
    double min_gap = 0.01;
};

struct DataPaths {
    std::string catalog_dir;
    std::string train_regions;
    std::string test_regions;
    std::string test_gt;

    /// True when every path is set; otherwise the scenario is simulated.
    bool complete() const;
};

/// Every tunable of a run. `train.seed` is the run seed.
struct RunConfig {
    TrainConfig train;
    ScenarioConfig sim;
    SynthConfig synth;
    SynthClassifierConfig synth_classifier;
    ReproduceConfig reproduce;
    DataPaths data;

    /// Copies the run seed into the scenario, synthesizer and classifier
    /// configs, and the regularizer settings (other than lambda) into the
    /// synthesizer's.
    void resolve();
};

struct ConfigKey {
    std::string key;
    std::string help;
};

/// Every accepted key with a one-line description, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// `key = value` lines; `#` starts a comment. Absent keys keep their
/// defaults. Unknown keys and bad values throw ConfigError naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Applies a single assignment; `line` only feeds error messages.
void apply_config_value(RunConfig& config, std::string_view key, std::string_view value, std::size_t line = 0);

/// Every key with its current value. parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

std::string to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(std::string_view text);

}  // namespace descreg
