#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace descreg {

inline constexpr std::string_view kBackgroundLabel = "__bg__";

/// Axis-aligned box, x1 < x2 and y1 < y2 for well-ordered boxes.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    bool well_ordered() const { return x1 < x2 && y1 < y2; }
    friend bool operator==(const Box&, const Box&) = default;
};

/// One proposal region with its pooled visual feature.
struct RegionSample {
    std::string image_id;
    Box box;
    std::string label;  // class name or kBackgroundLabel
    Eigen::VectorXd feature;

    bool is_background() const { return label == kBackgroundLabel; }
};

struct GroundTruthBox {
    std::string image_id;
    Box box;
    std::string class_name;
};

struct Detection {
    std::string image_id;
    Box box;
    std::string class_name;
    double score = 0.0;
};

struct RegionSet {
    std::size_t dim = 0;
    std::vector<RegionSample> regions;
};

RegionSet parse_regions(std::istream& in);
RegionSet load_regions(const std::string& path);
std::string format_regions(const RegionSet& set);

std::vector<GroundTruthBox> parse_ground_truth(std::istream& in);
std::vector<GroundTruthBox> load_ground_truth(const std::string& path);
std::string format_ground_truth(const std::vector<GroundTruthBox>& boxes);

std::vector<Detection> parse_detections(std::istream& in);
std::vector<Detection> load_detections(const std::string& path);
std::string format_detections(const std::vector<Detection>& dets);

}  // namespace descreg
