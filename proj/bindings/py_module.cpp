#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "guesslab/analytics.hpp"
#include "guesslab/checkpoint.hpp"
#include "guesslab/imagination.hpp"
#include "guesslab/pipeline.hpp"

namespace py = pybind11;
using namespace guesslab;

namespace {

Config config_with_overrides(const std::vector<std::string>& overrides) {
    Config cfg = Config::defaults();
    for (const auto& kv : overrides) cfg.apply_override(kv);
    return cfg;
}

/// Owning wrapper so encode/decode stay valid from Python.
struct PyImagination {
    ImaginationModel model;

    static PyImagination load(const std::string& path) {
        return {ImaginationModel::from_checkpoint(Checkpoint::load(path))};
    }
    std::vector<double> encode(const std::vector<double>& v) const {
        return model.encode(v);
    }
    std::vector<double> decode(const std::vector<double>& z) const {
        return model.decode(z);
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "guesslab core: synthetic guessing games with label-free object embeddings";

    m.def(
        "spatial_features",
        [](double x, double y, double w, double h, int image_w, int image_h) {
            auto s = spatial_features({x, y, w, h}, image_w, image_h);
            return std::vector<double>(s.begin(), s.end());
        },
        py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"), py::arg("image_w"),
        py::arg("image_h"),
        "normalized [x_min, y_min, x_max, y_max, x_c, y_c, width, height]");

    m.def(
        "mse",
        [](const std::vector<double>& a, const std::vector<double>& b) { return mse(a, b); },
        py::arg("a"), py::arg("b"));

    m.def(
        "reconstruction_loss",
        [](const std::vector<double>& v_i, const std::vector<double>& v_j,
           const std::vector<double>& v_tilde, double eta, bool paper_literal) {
            auto r = reconstruction_loss(v_i, v_j, v_tilde, eta, paper_literal);
            return py::make_tuple(r.loss, r.grad_vtilde, r.hinge_active);
        },
        py::arg("v_i"), py::arg("v_j"), py::arg("v_tilde"), py::arg("eta") = 1.0,
        py::arg("paper_literal") = false,
        "(loss, grad wrt v_tilde, hinge_active) of the scene-local triplet loss");

    m.def(
        "grolla", [](const std::vector<double>& components) { return grolla(components); },
        py::arg("components"));

    m.def(
        "classify_question",
        [](const std::string& text, const std::string& lexicon_path) {
            Lexicon lex = Lexicon::load(lexicon_path);
            QuestionClass qc = classify_question(text, lex);
            return qtype_name(qc.qtype) + (qc.subtag.empty() ? "" : ":" + qc.subtag);
        },
        py::arg("text"), py::arg("lexicon_path"));

    py::class_<PyImagination>(m, "ImaginationModel")
        .def_static("load", &PyImagination::load, py::arg("checkpoint_path"))
        .def("encode", &PyImagination::encode, py::arg("v"))
        .def("decode", &PyImagination::decode, py::arg("z"))
        .def_property_readonly("d_z",
                               [](const PyImagination& s) { return s.model.d_z(); })
        .def_property_readonly("d_o",
                               [](const PyImagination& s) { return s.model.d_o(); });

    m.def(
        "generate",
        [](const std::string& out_dir, std::uint64_t seed,
           const std::vector<std::string>& overrides) {
            std::ostringstream log;
            cmd_generate(config_with_overrides(overrides), seed, RunPaths::at(out_dir), log);
            return log.str();
        },
        py::arg("out_dir"), py::arg("seed") = 42,
        py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "train",
        [](const std::string& out_dir, const std::string& component, std::uint64_t seed,
           const std::vector<std::string>& overrides) {
            std::ostringstream log;
            cmd_train(config_with_overrides(overrides), seed, RunPaths::at(out_dir),
                      component, log);
            return log.str();
        },
        py::arg("out_dir"), py::arg("component"), py::arg("seed") = 42,
        py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "evaluate",
        [](const std::string& out_dir, const std::string& suite, std::uint64_t seed,
           const std::vector<std::string>& overrides) {
            std::ostringstream log;
            RunPaths paths = RunPaths::at(out_dir);
            cmd_eval(config_with_overrides(overrides), seed, paths, suite, log);
            return MetricsReport::read_json(paths.reports + "/" + suite + "_report.json")
                .values;
        },
        py::arg("out_dir"), py::arg("suite") = "all", py::arg("seed") = 42,
        py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "read_report",
        [](const std::string& path) { return MetricsReport::read_json(path).values; },
        py::arg("path"));
}
