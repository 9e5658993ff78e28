#include "model_io.hpp"

#include <istream>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"

namespace descreg::io {

using Index = Eigen::Index;

void append_row(std::string& out, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    for (Index k = 0; k < row.size(); ++k) {
        if (k) out += ' ';
        out += textio::format_real(row(k));
    }
    out += '\n';
}

void append_classes(std::string& out, const std::vector<std::string>& names, std::size_t n_seen,
                    const Eigen::MatrixXd& inputs) {
    out += "classes " + std::to_string(names.size()) + " " + std::to_string(n_seen) + "\n";
    for (const auto& name : names) out += "class " + name + "\n";
    out += "inputs " + std::to_string(inputs.rows()) + " " + std::to_string(inputs.cols()) + "\n";
    for (Index r = 0; r < inputs.rows(); ++r) append_row(out, inputs.row(r));
}

void append_head(std::string& out, const ProjectionHead& head) {
    out += "depth " + std::to_string(head.depth()) + "\n";
    for (const auto& L : head.layers()) {
        out += "layer " + std::to_string(L.weight.rows()) + " " + std::to_string(L.weight.cols()) + "\n";
        for (Index r = 0; r < L.weight.rows(); ++r) append_row(out, L.weight.row(r));
        append_row(out, L.bias.transpose());
    }
}

LineReader::LineReader(std::istream& in, std::string kind) : lines_(textio::read_lines(in)), kind_(std::move(kind)) {}

const std::string& LineReader::next() {
    if (pos_ >= lines_.size()) throw FormatError("unexpected end of " + kind_ + " file", pos_ + 1);
    return lines_[pos_++];
}

std::vector<std::string_view> LineReader::keyed(std::string_view key, std::size_t count) {
    const std::string& line = next();
    auto tokens = textio::split_spaces(line);
    if (tokens.empty() || tokens[0] != key || tokens.size() != count + 1) {
        throw FormatError("expected '" + std::string(key) + "' with " + std::to_string(count) + " values", pos_);
    }
    tokens.erase(tokens.begin());
    return tokens;
}

std::size_t LineReader::integer(std::string_view tok) {
    auto v = textio::parse_integer(tok);
    if (!v || *v < 0) throw FormatError("expected a non-negative integer", pos_);
    return static_cast<std::size_t>(*v);
}

double LineReader::real(std::string_view tok) {
    auto v = textio::parse_real(tok);
    if (!v) throw FormatError("non-numeric token '" + std::string(tok) + "'", pos_);
    return *v;
}

Eigen::RowVectorXd LineReader::row(std::size_t count) {
    const std::string& line = next();
    const auto tokens = textio::split_spaces(line);
    if (tokens.size() != count) throw FormatError("expected " + std::to_string(count) + " values", pos_);
    Eigen::RowVectorXd out(static_cast<Index>(count));
    for (std::size_t k = 0; k < count; ++k) out(static_cast<Index>(k)) = real(tokens[k]);
    return out;
}

EmbeddingSource LineReader::source() {
    const auto tok = keyed("source", 1)[0];
    try {
        return parse_embedding_source(tok);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what(), pos_);
    }
}

void LineReader::classes(std::vector<std::string>& names, std::size_t& n_seen, Eigen::MatrixXd& inputs) {
    const auto counts = keyed("classes", 2);
    const std::size_t n = integer(counts[0]);
    n_seen = integer(counts[1]);
    names.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& line = next();
        if (line.rfind("class ", 0) != 0 || line.size() <= 6) throw FormatError("expected 'class <name>'", pos_);
        names.push_back(line.substr(6));
    }
    const auto shape = keyed("inputs", 2);
    const std::size_t rows = integer(shape[0]), cols = integer(shape[1]);
    inputs.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) inputs.row(static_cast<Index>(r)) = row(cols);
}

ProjectionHead LineReader::head() {
    const std::size_t depth = integer(keyed("depth", 1)[0]);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < depth; ++l) {
        const auto dims = keyed("layer", 2);
        const std::size_t out_dim = integer(dims[0]), in_dim = integer(dims[1]);
        DenseLayer L;
        L.weight.resize(static_cast<Index>(out_dim), static_cast<Index>(in_dim));
        for (std::size_t r = 0; r < out_dim; ++r) L.weight.row(static_cast<Index>(r)) = row(in_dim);
        L.bias = row(out_dim).transpose();
        layers.push_back(std::move(L));
    }
    try {
        return ProjectionHead(std::move(layers));
    } catch (const ShapeError& e) {
        throw FormatError(e.what(), pos_);
    }
}

}  // namespace descreg::io
