#include "descreg/similarity.hpp"

#include <cmath>
#include <stdexcept>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"

namespace descreg {

namespace {

Eigen::MatrixXd cosine_impl(const Eigen::MatrixXd& rows, const std::vector<std::string>* names) {
    const Eigen::Index n = rows.rows();
    Eigen::VectorXd norms = rows.rowwise().norm();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(norms(i) > 0.0) || !std::isfinite(norms(i))) {
            const std::string who = names ? "'" + (*names)[static_cast<std::size_t>(i)] + "'"
                                          : "row " + std::to_string(i);
            throw std::invalid_argument("embedding for class " + who + " has zero or non-finite norm");
        }
    }
    Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * rows;
    Eigen::MatrixXd sim = unit * unit.transpose();
    // Symmetrize exactly so (j,k) and (k,j) are bit-identical; cos(t, t) is 1.
    for (Eigen::Index j = 0; j < n; ++j) {
        sim(j, j) = 1.0;
        for (Eigen::Index k = j + 1; k < n; ++k) sim(k, j) = sim(j, k);
    }
    return sim;
}

}  // namespace

Eigen::MatrixXd cosine_matrix(const EmbeddingSet& embeddings) {
    return cosine_impl(embeddings.vectors, &embeddings.names);
}

Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& rows) { return cosine_impl(rows, nullptr); }

Eigen::MatrixXd self_excluding_softmax(const Eigen::MatrixXd& raw, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
    const Eigen::Index n = raw.rows();
    if (raw.cols() != n) throw ShapeError("similarity matrix must be square");
    if (n < 2) throw std::invalid_argument("self-excluding softmax needs at least 2 classes");

    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double row_max = -INFINITY;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k != j) row_max = std::max(row_max, raw(j, k) / tau);
        }
        double denom = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == j) continue;
            out(j, k) = std::exp(raw(j, k) / tau - row_max);
            denom += out(j, k);
        }
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k != j) out(j, k) /= denom;
        }
        out(j, j) = raw(j, j);
    }
    return out;
}

SimilarityMatrix description_similarity(const EmbeddingSet& descriptions, double tau) {
    SimilarityMatrix sim;
    sim.raw = cosine_matrix(descriptions);
    sim.normalized = self_excluding_softmax(sim.raw, tau);
    sim.tau = tau;
    sim.kind = SimilarityKind::Description;
    return sim;
}

SimilarityMatrix diagonal_matrix(std::size_t n) {
    if (n < 2) throw std::invalid_argument("diagonal similarity needs at least 2 classes");
    SimilarityMatrix sim;
    sim.raw = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sim.normalized = sim.raw;
    sim.kind = SimilarityKind::Diagonal;
    return sim;
}

std::string format_similarity_csv(const std::vector<std::string>& names, const Eigen::MatrixXd& matrix) {
    if (static_cast<Eigen::Index>(names.size()) != matrix.rows() || matrix.rows() != matrix.cols()) {
        throw ShapeError("similarity CSV: names and matrix disagree");
    }
    const auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += quote(names[i]);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
            if (c) out += ',';
            out += textio::format_real(matrix(r, c));
        }
        out += '\n';
    }
    return out;
}

}  // namespace descreg
