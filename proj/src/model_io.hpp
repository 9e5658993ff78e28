#pragma once

// Text helpers shared by the model and synthesizer file formats.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "descreg/alignment.hpp"

namespace descreg::io {

void append_row(std::string& out, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// "classes n n_seen", one "class <name>" line each, then "inputs r c" and the rows.
void append_classes(std::string& out, const std::vector<std::string>& names, std::size_t n_seen,
                    const Eigen::MatrixXd& inputs);

/// "depth k", then per layer "layer out in", its weight rows and the bias row.
void append_head(std::string& out, const ProjectionHead& head);

class LineReader {
public:
    LineReader(std::istream& in, std::string kind);

    const std::string& next();
    std::size_t line_no() const { return pos_; }

    /// Tokens after `key` on the next line, which must carry exactly `count` of them.
    std::vector<std::string_view> keyed(std::string_view key, std::size_t count);
    std::size_t integer(std::string_view tok);
    double real(std::string_view tok);
    Eigen::RowVectorXd row(std::size_t count);

    EmbeddingSource source();
    void classes(std::vector<std::string>& names, std::size_t& n_seen, Eigen::MatrixXd& inputs);
    ProjectionHead head();

private:
    std::vector<std::string> lines_;
    std::string kind_;
    std::size_t pos_ = 0;
};

}  // namespace descreg::io
