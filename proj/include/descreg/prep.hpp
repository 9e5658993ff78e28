#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "descreg/catalog.hpp"
#include "descreg/rng.hpp"

namespace descreg {

inline constexpr long kDefaultPatch = 800;

/// Window starts along one image axis.
struct AxisPlan {
    long length = 0;
    long patch = kDefaultPatch;
    std::vector<long> starts;

    std::size_t count() const { return starts.size(); }
    /// Pixels added after the image edge; nonzero only for a single window.
    long padding() const { return length < patch ? patch - length : 0; }
    /// Pixels shared by windows i and i+1.
    long overlap(std::size_t i) const { return starts[i] + patch - starts[i + 1]; }
};

/// An axis of length L <= patch gets one window at 0 (padded when L < patch).
/// Longer axes get L / patch + 1 windows; starts are i * (L - patch) / (count - 1)
/// rounded half-up, so the first window starts at 0 and the last ends at L.
AxisPlan plan_axis(long length, long patch = kDefaultPatch);

/// Overlap of consecutive windows before rounding: patch + (patch - L) / (L / patch).
/// Zero when the axis needs a single window.
double nominal_overlap(long length, long patch = kDefaultPatch);

struct CropWindow {
    long x = 0;
    long y = 0;
    long width = 0;   // always the patch size
    long height = 0;
    long pad_x = 0;
    long pad_y = 0;
};

struct CropPlan {
    AxisPlan x;
    AxisPlan y;

    /// Row-major: all windows of the first row of starts, then the next.
    std::vector<CropWindow> windows() const;
};

/// Cartesian product of the two axis plans. Throws on non-positive sizes.
CropPlan crop_plan(long width, long height, long patch = kDefaultPatch);

/// index,x,y,width,height,pad_x,pad_y
std::string format_crop_csv(const CropPlan& plan);

/// A pair of leaves merged directly by the dendrogram.
struct LeafPair {
    std::size_t a = 0;
    std::size_t b = 0;
    double distance = 0.0;
};

/// Average-linkage agglomerative clustering on cosine distance (1 - cos).
/// Returns the merges that join two single classes, tightest first.
std::vector<LeafPair> leaf_pairs(const EmbeddingSet& embeddings);

/// Marks one member of each of the n_unseen tightest leaf pairs as unseen.
/// The member is drawn at random, skipping a member whose nearest neighbour
/// is already unseen or that is the nearest neighbour of an unseen class; a
/// pair with no admissible member is passed over.
/// Seen and unseen lists keep the embedding file order.
ClassSplit cluster_split(const EmbeddingSet& embeddings, std::size_t n_unseen, Rng& rng);

}  // namespace descreg
