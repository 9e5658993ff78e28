#include "descreg/prep.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "descreg/similarity.hpp"

namespace descreg {

AxisPlan plan_axis(long length, long patch) {
    if (length <= 0) throw std::invalid_argument("image dimension must be positive");
    if (patch <= 0) throw std::invalid_argument("patch size must be positive");
    AxisPlan plan;
    plan.length = length;
    plan.patch = patch;
    if (length <= patch) {
        plan.starts.push_back(0);
        return plan;
    }
    const long count = length / patch + 1;
    const long span = length - patch;
    const long steps = count - 1;
    plan.starts.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        // round(i * span / steps), halves rounded up, in exact integer arithmetic
        plan.starts.push_back((2 * i * span + steps) / (2 * steps));
    }
    return plan;
}

double nominal_overlap(long length, long patch) {
    if (length <= 0 || patch <= 0) throw std::invalid_argument("image dimension must be positive");
    if (length <= patch) return 0.0;
    return static_cast<double>(patch) + static_cast<double>(patch - length) / static_cast<double>(length / patch);
}

std::vector<CropWindow> CropPlan::windows() const {
    std::vector<CropWindow> out;
    out.reserve(x.count() * y.count());
    for (long sy : y.starts) {
        for (long sx : x.starts) {
            out.push_back({sx, sy, x.patch, y.patch, x.padding(), y.padding()});
        }
    }
    return out;
}

CropPlan crop_plan(long width, long height, long patch) {
    return {plan_axis(width, patch), plan_axis(height, patch)};
}

std::string format_crop_csv(const CropPlan& plan) {
    std::string out = "index,x,y,width,height,pad_x,pad_y\n";
    std::size_t i = 0;
    for (const auto& w : plan.windows()) {
        out += std::to_string(i++) + "," + std::to_string(w.x) + "," + std::to_string(w.y) + "," +
               std::to_string(w.width) + "," + std::to_string(w.height) + "," + std::to_string(w.pad_x) + "," +
               std::to_string(w.pad_y) + "\n";
    }
    return out;
}

std::vector<LeafPair> leaf_pairs(const EmbeddingSet& embeddings) {
    const Eigen::MatrixXd cos = cosine_matrix(embeddings);
    const std::size_t n = embeddings.size();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Ones(n, n) - cos;
    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);

    std::vector<LeafPair> pairs;
    for (std::size_t merges = 0; merges + 1 < n; ++merges) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (active[j] && dist(i, j) < best) {
                    best = dist(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        if (size[bi] == 1 && size[bj] == 1) pairs.push_back({bi, bj, best});
        // Lance-Williams update for average linkage; the merged cluster keeps slot bi.
        const double wi = static_cast<double>(size[bi]);
        const double wj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double d = (wi * dist(bi, k) + wj * dist(bj, k)) / (wi + wj);
            dist(bi, k) = d;
            dist(k, bi) = d;
        }
        size[bi] += size[bj];
        active[bj] = false;
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const LeafPair& a, const LeafPair& b) { return a.distance < b.distance; });
    return pairs;
}

ClassSplit cluster_split(const EmbeddingSet& embeddings, std::size_t n_unseen, Rng& rng) {
    embeddings.validate();
    const std::size_t n = embeddings.size();
    if (n_unseen >= n) throw std::invalid_argument("n_unseen must be smaller than the class count");

    std::vector<bool> unseen(n, false);
    if (n_unseen > 0) {
        const Eigen::MatrixXd cos = cosine_matrix(embeddings);
        std::vector<std::size_t> nearest(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && cos(i, k) > best) {
                    best = cos(i, k);
                    nearest[i] = k;
                }
            }
        }
        const auto admissible = [&](std::size_t c) {
            if (unseen[nearest[c]]) return false;
            for (std::size_t u = 0; u < n; ++u) {
                if (unseen[u] && nearest[u] == c) return false;
            }
            return true;
        };

        const auto pairs = leaf_pairs(embeddings);
        std::size_t chosen = 0;
        for (const auto& p : pairs) {
            if (chosen == n_unseen) break;
            std::size_t first = p.a, second = p.b;
            if (rng.index(2) == 1) std::swap(first, second);
            if (admissible(first)) {
                unseen[first] = true;
            } else if (admissible(second)) {
                unseen[second] = true;
            } else {
                continue;
            }
            ++chosen;
        }
        if (chosen < n_unseen) {
            throw std::invalid_argument("only " + std::to_string(chosen) + " leaf pairs available for " +
                                        std::to_string(n_unseen) + " unseen classes");
        }
    }

    ClassSplit split;
    for (std::size_t i = 0; i < n; ++i) (unseen[i] ? split.unseen : split.seen).push_back(embeddings.names[i]);
    return split;
}

}  // namespace descreg
