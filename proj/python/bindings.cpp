#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "descreg/alignment.hpp"
#include "descreg/config.hpp"
#include "descreg/detmetrics.hpp"
#include "descreg/error.hpp"
#include "descreg/pipeline.hpp"
#include "descreg/prep.hpp"
#include "descreg/similarity.hpp"
#include "descreg/simdata.hpp"
#include "descreg/synth.hpp"

namespace py = pybind11;
using namespace descreg;

namespace {

AlignmentModel model_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_model(in);
}

}  // namespace

PYBIND11_MODULE(_descreg, m) {
    m.doc() = "Description-similarity regularized zero-shot detection heads";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

    py::enum_<RegMode>(m, "RegMode")
        .value("OFF", RegMode::Off)
        .value("ADAPTIVE", RegMode::Adaptive)
        .value("FIXED", RegMode::Fixed)
        .value("DIAGONAL", RegMode::Diagonal)
        .value("DIRECT_L2", RegMode::DirectL2);
    py::enum_<Setting>(m, "Setting").value("ZSD", Setting::ZSD).value("GZSD", Setting::GZSD);
    py::enum_<EmbeddingSource>(m, "EmbeddingSource")
        .value("SEMANTIC", EmbeddingSource::Semantic)
        .value("DESCRIPTION", EmbeddingSource::Description)
        .value("ONEHOT", EmbeddingSource::OneHot);

    // -- similarity --------------------------------------------------------
    m.def("cosine_matrix", py::overload_cast<const Eigen::MatrixXd&>(&cosine_matrix), py::arg("rows"),
          "Pairwise cosine similarity of the rows.");
    m.def("self_excluding_softmax", &self_excluding_softmax, py::arg("raw"), py::arg("tau"),
          "Row softmax over off-diagonal entries at temperature tau; the diagonal stays as given.");
    m.def("harmonic_mean", &harmonic_mean, py::arg("seen"), py::arg("unseen"));

    // -- regularizer -------------------------------------------------------
    m.def(
        "direct_similarity_reg",
        [](const Eigen::MatrixXd& w, const Eigen::MatrixXd& normalized) {
            SimilarityMatrix sim;
            sim.raw = normalized;
            sim.normalized = normalized;
            const LossValue v = direct_similarity_reg(w, sim);
            return py::make_tuple(v.value, v.grad);
        },
        py::arg("embeddings"), py::arg("normalized_similarity"), "Returns (value, gradient).");
    m.def(
        "triplet_loss",
        [](const Eigen::MatrixXd& w, std::size_t anchor, std::size_t positive, std::size_t negative, double margin) {
            const LossValue v = triplet_loss(w, {anchor, positive, negative, margin});
            return py::make_tuple(v.value, v.grad);
        },
        py::arg("embeddings"), py::arg("anchor"), py::arg("positive"), py::arg("negative"), py::arg("margin"),
        "max(0, d(a,p) - d(a,n) + margin); returns (value, gradient).");

    // -- prep --------------------------------------------------------------
    m.def(
        "crop_plan",
        [](long width, long height, long patch) {
            const CropPlan plan = crop_plan(width, height, patch);
            py::list out;
            for (const auto& w : plan.windows()) out.append(py::make_tuple(w.x, w.y, w.width, w.height, w.pad_x, w.pad_y));
            return out;
        },
        py::arg("width"), py::arg("height"), py::arg("patch") = kDefaultPatch,
        "List of (x, y, width, height, pad_x, pad_y) windows.");
    m.def(
        "cluster_split",
        [](const std::vector<std::string>& names, const Eigen::MatrixXd& vectors, std::size_t n_unseen,
           std::uint64_t seed) {
            EmbeddingSet set;
            set.dim = static_cast<std::size_t>(vectors.cols());
            set.names = names;
            set.vectors = vectors;
            Rng rng(mix_seed(seed, 31));
            const ClassSplit s = cluster_split(set, n_unseen, rng);
            return py::make_tuple(s.seen, s.unseen);
        },
        py::arg("names"), py::arg("vectors"), py::arg("n_unseen"), py::arg("seed") = 0, "Returns (seen, unseen).");

    // -- configuration -----------------------------------------------------
    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init([](const std::string& text) { return parse_config(text); }), py::arg("text") = "")
        .def("set", [](RunConfig& c, const std::string& key, const std::string& value) {
            apply_config_value(c, key, value);
            c.resolve();
        })
        .def("text", &format_config)
        .def_property_readonly("seed", [](const RunConfig& c) { return c.train.seed; });
    m.def("config_keys", [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& k : config_keys()) out.emplace_back(k.key, k.help);
        return out;
    });

    // -- data --------------------------------------------------------------
    py::class_<Detection>(m, "Detection")
        .def_readonly("image_id", &Detection::image_id)
        .def_readonly("class_name", &Detection::class_name)
        .def_readonly("score", &Detection::score)
        .def_property_readonly("box", [](const Detection& d) { return py::make_tuple(d.box.x1, d.box.y1, d.box.x2, d.box.y2); });

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("class_names", [](const Dataset& d) { return d.catalog.names(); })
        .def_property_readonly("seen", [](const Dataset& d) { return d.catalog.split.seen; })
        .def_property_readonly("unseen", [](const Dataset& d) { return d.catalog.split.unseen; })
        .def_property_readonly("semantic", [](const Dataset& d) { return d.catalog.semantic.vectors; })
        .def_property_readonly("descriptions", [](const Dataset& d) { return d.catalog.descriptions.vectors; })
        .def_readonly("prototypes", &Dataset::prototypes)
        .def_readonly("description_sim", &Dataset::description_sim)
        .def_property_readonly("train_features", [](const Dataset& d) { return label_regions(d.train, d.catalog.names()).features; })
        .def_property_readonly("train_labels", [](const Dataset& d) { return label_regions(d.train, d.catalog.names()).labels; })
        .def_property_readonly("test_features", [](const Dataset& d) { return label_regions(d.test, d.catalog.names()).features; })
        .def_property_readonly("test_labels", [](const Dataset& d) { return label_regions(d.test, d.catalog.names()).labels; })
        .def("save", [](const Dataset& d, const std::string& dir) { save_dataset(d, dir); });
    m.def("simulate", [](const RunConfig& c) { return generate_dataset(c.sim); }, py::arg("config"),
          "Planted-similarity scenario for the configured seed.");

    // -- training and inference ---------------------------------------------
    py::class_<AlignmentModel>(m, "AlignmentModel")
        .def_property_readonly("class_names", [](const AlignmentModel& a) { return a.class_names; })
        .def_property_readonly("n_seen", [](const AlignmentModel& a) { return a.n_seen; })
        .def_readonly("background", &AlignmentModel::background)
        .def_readonly("score_scale", &AlignmentModel::score_scale)
        .def("class_weights", &AlignmentModel::class_weights)
        .def("text", &format_model)
        .def_static("from_text", &model_from_text);

    m.def(
        "train",
        [](const Dataset& d, const RunConfig& c) {
            const auto train = label_regions(d.train, d.catalog.names());
            const auto test = label_regions(d.test, d.catalog.names());
            TrainResult r = train_alignment(d.catalog, train, c.train, &test);
            py::list hist;
            for (const auto& h : r.history) {
                py::dict row;
                row["epoch"] = h.epoch;
                row["cls_loss"] = h.cls_loss;
                row["reg_loss"] = h.reg_loss;
                row["seen_accuracy"] = h.seen_accuracy;
                row["unseen_accuracy"] = h.unseen_accuracy;
                hist.append(row);
            }
            return py::make_tuple(std::move(r.model), hist);
        },
        py::arg("dataset"), py::arg("config"), "Returns (model, per-epoch history).");
    m.def(
        "train_synth_classifier",
        [](const Dataset& d, const RunConfig& c) {
            const auto train = label_regions(d.train, d.catalog.names());
            const Synthesizer s = train_synthesizer(d.catalog, train, c.synth).synth;
            return train_classifier_from_synth(s, train, c.synth_classifier);
        },
        py::arg("dataset"), py::arg("config"));
    m.def(
        "infer",
        [](const AlignmentModel& model, const Dataset& d, Setting setting) { return infer_detections(model, d.test, setting); },
        py::arg("model"), py::arg("dataset"), py::arg("setting"));
    m.def(
        "evaluate",
        [](const std::vector<Detection>& dets, const Dataset& d, Setting setting) {
            const EvalReport r = evaluate(dets, d.test_gt, d.catalog.split, setting);
            py::dict out;
            out["map_unseen"] = r.unseen.map;
            out["images"] = r.images;
            out["class_ap"] = r.class_ap;
            if (setting == Setting::GZSD) {
                out["map_seen"] = r.seen.map;
                out["map_hm"] = r.map_hm;
            }
            return out;
        },
        py::arg("detections"), py::arg("dataset"), py::arg("setting"));

    m.def(
        "reproduce",
        [](const RunConfig& c, const std::string& out_dir) {
            const ReproduceResult r = reproduce(c, out_dir);
            py::list rows;
            for (const auto& s : r.summary) {
                py::dict row;
                row["variant"] = s.variant;
                row["runs"] = s.runs;
                row["zsd_map"] = s.zsd_map;
                row["gzsd_seen_map"] = s.gzsd_seen_map;
                row["gzsd_unseen_map"] = s.gzsd_unseen_map;
                row["gzsd_hm"] = s.gzsd_hm;
                row["unseen_accuracy"] = s.unseen_accuracy;
                rows.append(row);
            }
            return rows;
        },
        py::arg("config"), py::arg("out_dir") = "", "Per-variant mean metrics of the comparison run.");
}
