#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "descreg/catalog.hpp"

namespace descreg {

enum class SimilarityKind {
    Description,  // cosine similarities of description embeddings
    Diagonal,     // every class similar only to itself
};

/// Raw pairwise cosine matrix and its row-wise self-excluding softmax.
///
/// `normalized` is not symmetric in general. Row j is the authority for
/// class j's similarities wherever they are consumed.
struct SimilarityMatrix {
    Eigen::MatrixXd raw;
    Eigen::MatrixXd normalized;
    double tau = 1.0;
    SimilarityKind kind = SimilarityKind::Description;

    std::size_t n() const { return static_cast<std::size_t>(raw.rows()); }
};

/// Entry (j,k) is cos(t_j, t_k). Throws naming the class if a vector has zero norm.
Eigen::MatrixXd cosine_matrix(const EmbeddingSet& embeddings);

/// Same computation over the rows of a bare matrix.
Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& rows);

/// Off-diagonal entries of each row become a temperature softmax over that
/// row's off-diagonal entries; the diagonal is copied from `raw` unchanged.
Eigen::MatrixXd self_excluding_softmax(const Eigen::MatrixXd& raw, double tau);

SimilarityMatrix description_similarity(const EmbeddingSet& descriptions, double tau);

/// Identity pattern; the raw and normalized matrices are the same.
SimilarityMatrix diagonal_matrix(std::size_t n);

/// Header row of class names, then one row of values per class.
std::string format_similarity_csv(const std::vector<std::string>& names, const Eigen::MatrixXd& matrix);

}  // namespace descreg
