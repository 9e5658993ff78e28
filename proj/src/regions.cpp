#include "descreg/regions.hpp"

#include <cmath>
#include <sstream>

#include "descreg/error.hpp"
#include "descreg/textio.hpp"

namespace descreg {

namespace {

Box parse_box(std::string_view field, std::size_t line_no) {
    const auto tokens = textio::split_spaces(field);
    if (tokens.size() != 4) throw FormatError("box needs 4 coordinates", line_no);
    double v[4];
    for (int i = 0; i < 4; ++i) {
        auto x = textio::parse_real(tokens[static_cast<std::size_t>(i)]);
        if (!x || !std::isfinite(*x)) {
            throw FormatError("non-numeric box coordinate '" + std::string(tokens[static_cast<std::size_t>(i)]) + "'",
                              line_no);
        }
        v[i] = *x;
    }
    Box b{v[0], v[1], v[2], v[3]};
    if (!b.well_ordered()) throw FormatError("box is not well-ordered (need x1<x2, y1<y2)", line_no);
    return b;
}

void append_box(std::string& out, const Box& b) {
    out += textio::format_real(b.x1) + ' ' + textio::format_real(b.y1) + ' ' + textio::format_real(b.x2) +
           ' ' + textio::format_real(b.y2);
}

void expect_header(const std::vector<std::string>& lines, std::string_view header) {
    if (lines.empty() || lines[0] != header) {
        throw FormatError("expected header '" + std::string(header) + "'", 1);
    }
}

template <typename Parse>
auto load_with_path(const std::string& path, Parse parse) {
    std::istringstream in(textio::read_file(path));
    try {
        return parse(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace

RegionSet parse_regions(std::istream& in) {
    const auto lines = textio::read_lines(in);
    expect_header(lines, "descreg-regions v1");
    if (lines.size() < 2) throw FormatError("missing 'dim <D>' line", 2);
    const auto dim_tokens = textio::split_spaces(lines[1]);
    std::optional<long long> dim;
    if (dim_tokens.size() == 2 && dim_tokens[0] == "dim") dim = textio::parse_integer(dim_tokens[1]);
    if (!dim || *dim < 1) throw FormatError("malformed 'dim <D>' line", 2);

    RegionSet set;
    set.dim = static_cast<std::size_t>(*dim);
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (lines[i].empty()) continue;
        const auto fields = textio::split_tabs(lines[i]);
        if (fields.size() != 4) throw FormatError("expected 4 tab-separated fields", line_no);
        if (fields[0].empty()) throw FormatError("empty image id", line_no);
        if (fields[2].empty()) throw FormatError("empty label", line_no);
        RegionSample r;
        r.image_id = std::string(fields[0]);
        r.box = parse_box(fields[1], line_no);
        r.label = std::string(fields[2]);
        const auto values = textio::split_spaces(fields[3]);
        if (values.size() != set.dim) {
            throw FormatError("dimension mismatch: expected " + std::to_string(set.dim) + " feature values, found " +
                                  std::to_string(values.size()),
                              line_no);
        }
        r.feature.resize(static_cast<Eigen::Index>(set.dim));
        for (std::size_t k = 0; k < values.size(); ++k) {
            auto x = textio::parse_real(values[k]);
            if (!x) throw FormatError("non-numeric token '" + std::string(values[k]) + "'", line_no);
            r.feature(static_cast<Eigen::Index>(k)) = *x;
        }
        set.regions.push_back(std::move(r));
    }
    return set;
}

RegionSet load_regions(const std::string& path) {
    return load_with_path(path, [](std::istream& in) { return parse_regions(in); });
}

std::string format_regions(const RegionSet& set) {
    std::string out = "descreg-regions v1\ndim " + std::to_string(set.dim) + "\n";
    for (const auto& r : set.regions) {
        if (static_cast<std::size_t>(r.feature.size()) != set.dim) throw ShapeError("region feature has wrong dimension");
        out += r.image_id;
        out += '\t';
        append_box(out, r.box);
        out += '\t';
        out += r.label;
        out += '\t';
        for (Eigen::Index k = 0; k < r.feature.size(); ++k) {
            if (k) out += ' ';
            out += textio::format_real(r.feature(k));
        }
        out += '\n';
    }
    return out;
}

std::vector<GroundTruthBox> parse_ground_truth(std::istream& in) {
    const auto lines = textio::read_lines(in);
    expect_header(lines, "descreg-gt v1");
    std::vector<GroundTruthBox> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (lines[i].empty()) continue;
        const auto fields = textio::split_tabs(lines[i]);
        if (fields.size() != 3) throw FormatError("expected 3 tab-separated fields", line_no);
        if (fields[0].empty() || fields[2].empty()) throw FormatError("empty image id or class", line_no);
        out.push_back({std::string(fields[0]), parse_box(fields[1], line_no), std::string(fields[2])});
    }
    return out;
}

std::vector<GroundTruthBox> load_ground_truth(const std::string& path) {
    return load_with_path(path, [](std::istream& in) { return parse_ground_truth(in); });
}

std::string format_ground_truth(const std::vector<GroundTruthBox>& boxes) {
    std::string out = "descreg-gt v1\n";
    for (const auto& g : boxes) {
        out += g.image_id;
        out += '\t';
        append_box(out, g.box);
        out += '\t';
        out += g.class_name;
        out += '\n';
    }
    return out;
}

std::vector<Detection> parse_detections(std::istream& in) {
    const auto lines = textio::read_lines(in);
    expect_header(lines, "descreg-dets v1");
    std::vector<Detection> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (lines[i].empty()) continue;
        const auto fields = textio::split_tabs(lines[i]);
        if (fields.size() != 4) throw FormatError("expected 4 tab-separated fields", line_no);
        if (fields[0].empty() || fields[2].empty()) throw FormatError("empty image id or class", line_no);
        auto score = textio::parse_real(fields[3]);
        if (!score || !std::isfinite(*score)) throw FormatError("score must be a finite real", line_no);
        out.push_back({std::string(fields[0]), parse_box(fields[1], line_no), std::string(fields[2]), *score});
    }
    return out;
}

std::vector<Detection> load_detections(const std::string& path) {
    return load_with_path(path, [](std::istream& in) { return parse_detections(in); });
}

std::string format_detections(const std::vector<Detection>& dets) {
    std::string out = "descreg-dets v1\n";
    for (const auto& d : dets) {
        out += d.image_id;
        out += '\t';
        append_box(out, d.box);
        out += '\t';
        out += d.class_name;
        out += '\t';
        out += textio::format_real(d.score);
        out += '\n';
    }
    return out;
}

}  // namespace descreg
