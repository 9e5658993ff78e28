#include "descreg/detmetrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "descreg/textio.hpp"

namespace descreg {

double iou(const Box& a, const Box& b) {
    const double area_a = a.area();
    const double area_b = b.area();
    if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (area_a + area_b - inter);
}

std::vector<Detection> sorted_by_score(std::span<const Detection> dets) {
    std::vector<Detection> out(dets.begin(), dets.end());
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return out;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thresh) {
    std::unordered_map<std::string_view, std::vector<std::size_t>> by_image;
    for (std::size_t g = 0; g < gts.size(); ++g) by_image[gts[g].image_id].push_back(g);

    MatchResult out;
    out.tp.assign(dets.size(), false);
    out.gt_matched.assign(gts.size(), false);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        auto it = by_image.find(dets[d].image_id);
        if (it == by_image.end()) continue;
        double best_iou = -1.0;
        std::size_t best = gts.size();
        for (std::size_t g : it->second) {
            if (out.gt_matched[g]) continue;
            const double o = iou(dets[d].box, gts[g].box);
            if (o >= iou_thresh && o > best_iou) {
                best_iou = o;
                best = g;
            }
        }
        if (best < gts.size()) {
            out.tp[d] = true;
            out.gt_matched[best] = true;
        }
    }
    return out;
}

double average_precision(const std::vector<bool>& tp_flags, std::size_t n_gt) {
    if (n_gt == 0) return 0.0;
    const std::size_t n = tp_flags.size();
    // Sentinels: recall 0 at the start, recall 1 / precision 0 at the end.
    std::vector<double> rec(n + 2, 0.0), prec(n + 2, 0.0);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (tp_flags[i]) ++tp;
        rec[i + 1] = static_cast<double>(tp) / static_cast<double>(n_gt);
        prec[i + 1] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    rec[n + 1] = 1.0;
    for (std::size_t i = n + 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
    double ap = 0.0;
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        if (rec[i + 1] != rec[i]) ap += (rec[i + 1] - rec[i]) * prec[i + 1];
    }
    return ap;
}

namespace {

std::vector<Detection> top_k_per_image(std::span<const Detection> dets, std::size_t k) {
    const auto sorted = sorted_by_score(dets);
    std::unordered_map<std::string_view, std::size_t> kept;
    std::vector<Detection> out;
    for (const auto& d : sorted) {
        if (kept[d.image_id]++ < k) out.push_back(d);
    }
    return out;
}

// Ground truths matched when each class is matched independently.
std::size_t matched_count(std::span<const Detection> sorted_dets, std::span<const GroundTruthBox> gts, double iou_thresh) {
    std::map<std::string_view, std::pair<std::vector<Detection>, std::vector<GroundTruthBox>>> by_class;
    for (const auto& g : gts) by_class[g.class_name].second.push_back(g);
    for (const auto& d : sorted_dets) {
        auto it = by_class.find(d.class_name);
        if (it != by_class.end()) it->second.first.push_back(d);
    }
    std::size_t matched = 0;
    for (const auto& [cls, pair] : by_class) {
        const auto m = match_detections(pair.first, pair.second, iou_thresh);
        matched += static_cast<std::size_t>(std::count(m.gt_matched.begin(), m.gt_matched.end(), true));
    }
    return matched;
}

template <typename T, typename Pred>
std::vector<T> filter(std::span<const T> items, Pred pred) {
    std::vector<T> out;
    for (const auto& x : items) {
        if (pred(x)) out.push_back(x);
    }
    return out;
}

}  // namespace

double recall_at_k(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thresh, std::size_t k) {
    if (k == 0) throw std::invalid_argument("recall@k needs k >= 1");
    if (gts.empty()) return 0.0;
    const auto kept = top_k_per_image(dets, k);
    return static_cast<double>(matched_count(kept, gts, iou_thresh)) / static_cast<double>(gts.size());
}

double harmonic_mean(double seen, double unseen) {
    if (seen < 0.0 || unseen < 0.0) throw std::invalid_argument("harmonic mean needs non-negative inputs");
    const double sum = seen + unseen;
    return sum == 0.0 ? 0.0 : 2.0 * seen * unseen / sum;
}

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, const ClassSplit& split,
                    Setting setting, const EvalOptions& options) {
    const std::unordered_set<std::string_view> seen(split.seen.begin(), split.seen.end());
    const std::unordered_set<std::string_view> unseen(split.unseen.begin(), split.unseen.end());
    for (const auto& d : dets) {
        if (!seen.count(d.class_name) && !unseen.count(d.class_name)) {
            throw std::invalid_argument("detection has unknown class '" + d.class_name + "'");
        }
    }
    for (const auto& g : gts) {
        if (!seen.count(g.class_name) && !unseen.count(g.class_name)) {
            throw std::invalid_argument("ground truth has unknown class '" + g.class_name + "'");
        }
    }

    EvalReport report;
    report.setting = setting;
    report.iou = options.iou;
    report.k = options.k;

    std::vector<Detection> pool;
    std::vector<GroundTruthBox> truth;
    std::set<std::string_view> images;
    if (setting == Setting::ZSD) {
        std::unordered_map<std::string_view, bool> all_unseen;
        for (const auto& g : gts) {
            auto [it, inserted] = all_unseen.emplace(g.image_id, true);
            it->second = it->second && unseen.count(g.class_name) > 0;
        }
        const auto keep_image = [&](std::string_view id) {
            auto it = all_unseen.find(id);
            return it != all_unseen.end() && it->second;
        };
        truth = filter(gts, [&](const GroundTruthBox& g) { return keep_image(g.image_id); });
        pool = filter(dets, [&](const Detection& d) { return keep_image(d.image_id) && unseen.count(d.class_name) > 0; });
        for (const auto& [id, ok] : all_unseen) {
            if (ok) images.insert(id);
        }
    } else {
        truth.assign(gts.begin(), gts.end());
        pool.assign(dets.begin(), dets.end());
        for (const auto& g : gts) images.insert(g.image_id);
    }
    report.images = images.size();

    const auto sorted = sorted_by_score(pool);
    const auto class_ap = [&](const std::string& cls) {
        const auto cd = filter(std::span<const Detection>(sorted), [&](const Detection& d) { return d.class_name == cls; });
        const auto cg = filter(std::span<const GroundTruthBox>(truth), [&](const GroundTruthBox& g) { return g.class_name == cls; });
        const auto m = match_detections(cd, cg, options.iou);
        return average_precision(m.tp, cg.size());
    };
    const auto subset = [&](const std::vector<std::string>& classes) {
        SubsetMetrics s;
        double sum = 0.0;
        for (const auto& cls : classes) {
            const double ap = class_ap(cls);
            report.class_ap[cls] = ap;
            sum += ap;
        }
        s.map = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
        const std::unordered_set<std::string_view> members(classes.begin(), classes.end());
        const auto kept = top_k_per_image(pool, options.k);
        const auto sd = filter(std::span<const Detection>(kept), [&](const Detection& d) { return members.count(d.class_name) > 0; });
        const auto sg = filter(std::span<const GroundTruthBox>(truth), [&](const GroundTruthBox& g) { return members.count(g.class_name) > 0; });
        for (double t : options.recall_ious) {
            s.recall[t] = sg.empty() ? 0.0 : static_cast<double>(matched_count(sd, sg, t)) / static_cast<double>(sg.size());
        }
        return s;
    };

    report.unseen = subset(split.unseen);
    if (setting == Setting::GZSD) {
        report.seen = subset(split.seen);
        report.map_hm = harmonic_mean(report.seen.map, report.unseen.map);
        for (double t : options.recall_ious) report.recall_hm[t] = harmonic_mean(report.seen.recall[t], report.unseen.recall[t]);
    }
    return report;
}

namespace {

std::string pct(double v) { return textio::format_fixed(100.0 * v, 4); }

std::string iou_label(double t) { return textio::format_real(t); }

}  // namespace

std::string format_report(const EvalReport& report) {
    std::string out;
    out += "setting = " + to_string(report.setting) + "\n";
    out += "iou = " + textio::format_real(report.iou) + "\n";
    out += "k = " + std::to_string(report.k) + "\n";
    out += "images = " + std::to_string(report.images) + "\n";
    if (report.setting == Setting::GZSD) {
        out += "map.seen = " + pct(report.seen.map) + "\n";
        out += "map.unseen = " + pct(report.unseen.map) + "\n";
        out += "map.hm = " + pct(report.map_hm) + "\n";
        for (const auto& [t, r] : report.seen.recall) {
            out += "recall.seen@" + iou_label(t) + " = " + pct(r) + "\n";
            out += "recall.unseen@" + iou_label(t) + " = " + pct(report.unseen.recall.at(t)) + "\n";
            out += "recall.hm@" + iou_label(t) + " = " + pct(report.recall_hm.at(t)) + "\n";
        }
    } else {
        out += "map.unseen = " + pct(report.unseen.map) + "\n";
        for (const auto& [t, r] : report.unseen.recall) out += "recall.unseen@" + iou_label(t) + " = " + pct(r) + "\n";
    }
    for (const auto& [cls, ap] : report.class_ap) out += "ap." + cls + " = " + pct(ap) + "\n";
    return out;
}

std::string format_ap_csv(const EvalReport& report, const ClassSplit& split) {
    std::string out = "class,subset,ap\n";
    const auto emit = [&](const std::vector<std::string>& classes, const char* subset) {
        for (const auto& cls : classes) {
            auto it = report.class_ap.find(cls);
            if (it != report.class_ap.end()) out += cls + "," + subset + "," + pct(it->second) + "\n";
        }
    };
    emit(split.seen, "seen");
    emit(split.unseen, "unseen");
    return out;
}

}  // namespace descreg
