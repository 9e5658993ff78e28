#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace descreg {

/// Named real vectors of a common dimension, in file order.
///
/// Row i of `vectors` belongs to `names[i]`. Vectors are stored as read;
/// nothing here normalizes them.
struct EmbeddingSet {
    std::size_t dim = 0;
    std::vector<std::string> names;
    Eigen::MatrixXd vectors;  // names.size() x dim

    std::size_t size() const { return names.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const;

    /// Throws std::invalid_argument if an invariant is broken.
    void validate() const;
};

EmbeddingSet parse_embedding_file(std::istream& in);
EmbeddingSet parse_embedding_text(std::string_view text);
EmbeddingSet load_embedding_file(const std::string& path);
std::string format_embedding_file(const EmbeddingSet& set);

struct ClassSplit {
    std::vector<std::string> seen;
    std::vector<std::string> unseen;

    /// Seen names followed by unseen names.
    std::vector<std::string> ordered() const;
    void validate() const;
};

ClassSplit parse_split_file(std::istream& in);
ClassSplit parse_split_text(std::string_view text);
ClassSplit load_split_file(const std::string& path);
std::string format_split_file(const ClassSplit& split);

/// Classes in canonical order: split.seen then split.unseen. Both embedding
/// sets are reordered to that order, so row i of either matrix is class i.
struct ClassCatalog {
    ClassSplit split;
    EmbeddingSet semantic;
    EmbeddingSet descriptions;

    std::size_t size() const { return split.seen.size() + split.unseen.size(); }
    std::size_t n_seen() const { return split.seen.size(); }
    std::size_t n_unseen() const { return split.unseen.size(); }
    bool is_seen(std::size_t index) const { return index < n_seen(); }
    const std::vector<std::string>& names() const { return semantic.names; }
    std::optional<std::size_t> index_of(std::string_view name) const {
        return semantic.index_of(name);
    }
};

/// Extra embedding rows not named by the split are dropped and reported in
/// `warnings` (when non-null). A split class absent from either set throws.
ClassCatalog build_catalog(const EmbeddingSet& semantic, const EmbeddingSet& descriptions,
                           const ClassSplit& split,
                           std::vector<std::string>* warnings = nullptr);

inline constexpr const char* kSemanticFile = "semantic.emb";
inline constexpr const char* kDescriptionFile = "descriptions.emb";
inline constexpr const char* kSplitFile = "split.txt";

/// Reads semantic.emb, descriptions.emb and split.txt from a directory.
ClassCatalog load_catalog_dir(const std::string& dir, std::vector<std::string>* warnings = nullptr);
void save_catalog_dir(const ClassCatalog& catalog, const std::string& dir);

}  // namespace descreg
