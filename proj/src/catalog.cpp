#include "descreg/catalog.hpp"

#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"

namespace descreg {

namespace {

constexpr std::string_view kEmbeddingHeader = "descreg-embeddings v1";
constexpr std::string_view kSplitHeader = "descreg-split v1";

bool valid_name(std::string_view name) {
    if (name.empty()) return false;
    for (char c : name) {
        if (c == '\t' || c == '\n' || c == '\r') return false;
    }
    return name.front() != ' ' && name.back() != ' ';
}

EmbeddingSet reorder(const EmbeddingSet& source, const std::vector<std::string>& order,
                     const char* label) {
    EmbeddingSet out;
    out.dim = source.dim;
    out.names = order;
    out.vectors.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(source.dim));
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto idx = source.index_of(order[i]);
        if (!idx) {
            throw FormatError(std::string("class '") + order[i] + "' missing from " + label +
                              " embeddings");
        }
        out.vectors.row(static_cast<Eigen::Index>(i)) = source.vectors.row(static_cast<Eigen::Index>(*idx));
    }
    return out;
}

}  // namespace

std::optional<std::size_t> EmbeddingSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    return std::nullopt;
}

void EmbeddingSet::validate() const {
    if (dim == 0) throw std::invalid_argument("embedding dim must be >= 1");
    if (static_cast<std::size_t>(vectors.rows()) != names.size() ||
        static_cast<std::size_t>(vectors.cols()) != dim) {
        throw ShapeError("embedding matrix shape does not match names/dim");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second) throw std::invalid_argument("duplicate embedding name '" + n + "'");
    }
}

EmbeddingSet parse_embedding_file(std::istream& in) {
    const auto lines = textio::read_lines(in);
    if (lines.empty() || lines[0] != kEmbeddingHeader) {
        throw FormatError("expected header '" + std::string(kEmbeddingHeader) + "'", 1);
    }
    if (lines.size() < 2) throw FormatError("missing 'dim <D>' line", 2);
    const auto dim_tokens = textio::split_spaces(lines[1]);
    std::optional<long long> dim;
    if (dim_tokens.size() == 2 && dim_tokens[0] == "dim") dim = textio::parse_integer(dim_tokens[1]);
    if (!dim || *dim < 1) throw FormatError("malformed 'dim <D>' line", 2);

    EmbeddingSet set;
    set.dim = static_cast<std::size_t>(*dim);
    std::vector<std::vector<double>> rows;
    std::unordered_map<std::string, std::size_t> first_line;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string& line = lines[i];
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError("expected '<name><TAB><values>'", line_no);
        std::string name = line.substr(0, tab);
        if (!valid_name(name)) throw FormatError("invalid class name", line_no);
        const auto tokens = textio::split_spaces(std::string_view(line).substr(tab + 1));
        if (tokens.size() != set.dim) {
            throw FormatError("dimension mismatch: expected " + std::to_string(set.dim) +
                                  " values, found " + std::to_string(tokens.size()),
                              line_no);
        }
        std::vector<double> values;
        values.reserve(tokens.size());
        for (auto tok : tokens) {
            auto v = textio::parse_real(tok);
            if (!v) throw FormatError("non-numeric token '" + std::string(tok) + "'", line_no);
            values.push_back(*v);
        }
        auto [it, inserted] = first_line.emplace(name, line_no);
        if (!inserted) {
            throw FormatError("duplicate name '" + name + "' (first at line " +
                                  std::to_string(it->second) + ")",
                              line_no);
        }
        set.names.push_back(std::move(name));
        rows.push_back(std::move(values));
    }
    set.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(set.dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < set.dim; ++c) {
            set.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return set;
}

EmbeddingSet parse_embedding_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_embedding_file(in);
}

EmbeddingSet load_embedding_file(const std::string& path) {
    std::istringstream in(textio::read_file(path));
    try {
        return parse_embedding_file(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::string format_embedding_file(const EmbeddingSet& set) {
    set.validate();
    std::string out;
    out += kEmbeddingHeader;
    out += "\ndim " + std::to_string(set.dim) + "\n";
    for (std::size_t r = 0; r < set.size(); ++r) {
        out += set.names[r];
        out += '\t';
        for (std::size_t c = 0; c < set.dim; ++c) {
            if (c) out += ' ';
            out += textio::format_real(set.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
        out += '\n';
    }
    return out;
}

std::vector<std::string> ClassSplit::ordered() const {
    std::vector<std::string> out = seen;
    out.insert(out.end(), unseen.begin(), unseen.end());
    return out;
}

void ClassSplit::validate() const {
    std::unordered_set<std::string_view> names;
    for (const auto& n : seen) {
        if (!names.insert(n).second) throw std::invalid_argument("class '" + n + "' listed twice in split");
    }
    for (const auto& n : unseen) {
        if (!names.insert(n).second) {
            throw std::invalid_argument("class '" + n + "' is both seen and unseen, or listed twice");
        }
    }
}

ClassSplit parse_split_file(std::istream& in) {
    const auto lines = textio::read_lines(in);
    if (lines.empty() || lines[0] != kSplitHeader) {
        throw FormatError("expected header '" + std::string(kSplitHeader) + "'", 1);
    }
    ClassSplit split;
    std::unordered_set<std::string> names;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string& line = lines[i];
        if (line.empty()) continue;
        const auto space = line.find(' ');
        if (space == std::string::npos) throw FormatError("expected 'seen <name>' or 'unseen <name>'", line_no);
        const std::string kind = line.substr(0, space);
        std::string name = line.substr(space + 1);
        if (!valid_name(name)) throw FormatError("invalid class name", line_no);
        if (!names.insert(name).second) throw FormatError("class '" + name + "' listed twice", line_no);
        if (kind == "seen") {
            split.seen.push_back(std::move(name));
        } else if (kind == "unseen") {
            split.unseen.push_back(std::move(name));
        } else {
            throw FormatError("unknown entry kind '" + kind + "'", line_no);
        }
    }
    return split;
}

ClassSplit parse_split_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_split_file(in);
}

ClassSplit load_split_file(const std::string& path) {
    std::istringstream in(textio::read_file(path));
    try {
        return parse_split_file(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::string format_split_file(const ClassSplit& split) {
    split.validate();
    std::string out(kSplitHeader);
    out += '\n';
    for (const auto& n : split.seen) out += "seen " + n + "\n";
    for (const auto& n : split.unseen) out += "unseen " + n + "\n";
    return out;
}

ClassCatalog build_catalog(const EmbeddingSet& semantic, const EmbeddingSet& descriptions,
                           const ClassSplit& split, std::vector<std::string>* warnings) {
    semantic.validate();
    descriptions.validate();
    split.validate();
    const auto order = split.ordered();

    ClassCatalog catalog;
    catalog.split = split;
    catalog.semantic = reorder(semantic, order, "semantic");
    catalog.descriptions = reorder(descriptions, order, "description");

    if (warnings) {
        const std::unordered_set<std::string_view> wanted(order.begin(), order.end());
        for (const auto* set : {&semantic, &descriptions}) {
            const char* label = set == &semantic ? "semantic" : "description";
            for (const auto& n : set->names) {
                if (!wanted.count(n)) {
                    warnings->push_back(std::string(label) + " embedding '" + n +
                                        "' is not in the split; dropped");
                }
            }
        }
    }
    return catalog;
}

ClassCatalog load_catalog_dir(const std::string& dir, std::vector<std::string>* warnings) {
    const std::filesystem::path root(dir);
    return build_catalog(load_embedding_file((root / kSemanticFile).string()),
                         load_embedding_file((root / kDescriptionFile).string()),
                         load_split_file((root / kSplitFile).string()), warnings);
}

void save_catalog_dir(const ClassCatalog& catalog, const std::string& dir) {
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    textio::write_file((root / kSemanticFile).string(), format_embedding_file(catalog.semantic));
    textio::write_file((root / kDescriptionFile).string(), format_embedding_file(catalog.descriptions));
    textio::write_file((root / kSplitFile).string(), format_split_file(catalog.split));
}

}  // namespace descreg
