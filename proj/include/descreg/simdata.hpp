#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "descreg/catalog.hpp"
#include "descreg/regions.hpp"
#include "descreg/rng.hpp"

namespace descreg {

/// Parameters of a planted-similarity scenario.
struct ScenarioConfig {
    std::size_t n_seen = 16;
    std::size_t n_unseen = 4;
    std::size_t feature_dim = 64;
    std::size_t regions_per_class = 200;
    /// Expected norm of the Gaussian added to each prototype
    /// (per-coordinate std is noise_sigma / sqrt(feature_dim)).
    double noise_sigma = 0.3;
    /// Share of all regions that are background proposals.
    double background_fraction = 0.2;
    /// Proposal jitter, as a fraction of box width/height.
    double box_jitter = 0.05;
    std::size_t images = 400;
    std::uint64_t seed = 0;

    std::size_t semantic_dim = 32;
    std::size_t description_dim = 48;
    /// Share of each seen class's regions held out for testing.
    double test_fraction = 0.25;
    /// Share of test objects placed on mixed seen+unseen images.
    double mixed_fraction = 0.25;
    /// Range of within-group similarity of the default grouped structure.
    double group_sim_min = 0.35;
    double group_sim_max = 0.65;
    /// Latent perturbation that gives distinct cross-group similarities.
    double cross_group_noise = 0.15;
    /// Perturbation of description embeddings away from the exact planted geometry.
    double description_noise = 0.1;

    std::size_t n_classes() const { return n_seen + n_unseen; }
    void validate() const;
};

inline constexpr double kImageSize = 800.0;

/// Unit-norm rows whose pairwise cosines approximate `target_sim` after
/// projecting it onto the PSD cone (negative eigenvalues clipped to 0).
Eigen::MatrixXd plant_prototypes(const Eigen::MatrixXd& target_sim, std::size_t dim, Rng& rng);

/// Default description similarity: one group per unseen class, seen classes
/// dealt round-robin into the groups.
Eigen::MatrixXd grouped_similarity(const ScenarioConfig& config, Rng& rng);

/// Group index of each class under grouped_similarity's layout.
std::vector<std::size_t> group_assignment(const ScenarioConfig& config);

struct Dataset {
    ClassCatalog catalog;
    RegionSet train;  // seen objects + background
    RegionSet test;   // proposals over seen and unseen objects + background
    std::vector<GroundTruthBox> test_gt;
    Eigen::MatrixXd prototypes;      // n_classes x feature_dim, catalog order
    Eigen::MatrixXd description_sim; // target similarity the data was planted from
};

Dataset generate_dataset(const ScenarioConfig& config, const Eigen::MatrixXd& description_sim);
Dataset generate_dataset(const ScenarioConfig& config);

/// Pearson correlation of the strictly-upper-triangular entries.
double offdiag_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

inline constexpr const char* kTrainRegionsFile = "train.regions";
inline constexpr const char* kTestRegionsFile = "test.regions";
inline constexpr const char* kTestGroundTruthFile = "test.gt";

/// Writes the catalog files plus train.regions, test.regions and test.gt.
void save_dataset(const Dataset& dataset, const std::string& dir);

}  // namespace descreg
