#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "craml/corpus.hpp"
#include "craml/error.hpp"
#include "craml/extraction.hpp"
#include "craml/learning/metrics.hpp"
#include "craml/learning/model.hpp"
#include "craml/pipeline.hpp"
#include "craml/rules.hpp"
#include "craml/synthetic.hpp"
#include "craml/util.hpp"

namespace py = pybind11;
using namespace craml;

namespace {

std::vector<std::string> chunks_of(const std::string& text, const std::vector<std::string>& keywords, std::size_t n) {
    if (n < 1) fail_usage("n must be >= 1");
    std::vector<std::string> lowered;
    for (const auto& k : keywords) lowered.push_back(clean(k, CleaningProfile::defaults()));
    auto profile = CleaningProfile::defaults();
    std::vector<std::string> out;
    for (auto& c : extract_chunks(clean(text, profile), lowered, WindowConfig{n, WindowUnit::words}, profile)) {
        out.push_back(std::move(c.text));
    }
    return out;
}

py::dict apply(const RuleSet& rules, const std::string& chunk) {
    auto outcome = apply_rules(chunk, rules);
    py::dict values;
    for (std::size_t t = 0; t < rules.tags().size(); ++t) {
        if (outcome.values[t]) values[py::str(rules.tags()[t])] = static_cast<int>(*outcome.values[t]);
        else values[py::str(rules.tags()[t])] = py::none();
    }
    py::dict out;
    out["values"] = values;
    out["rule"] = outcome.matched() ? py::object(py::str(outcome.winner->display())) : py::object(py::none());
    return out;
}

py::list run(const std::filesystem::path& config, const std::vector<std::string>& steps, bool force) {
    auto cfg = ProjectConfig::load(config);
    RunOptions options;
    options.steps = steps;
    options.force = force;
    RunManifest manifest;
    {
        py::gil_scoped_release release;
        manifest = run_pipeline(cfg, options);
    }
    py::list out;
    for (const auto& s : manifest.steps) {
        py::dict d;
        d["step"] = s.step;
        d["status"] = s.status;
        d["artifacts"] = s.artifacts;
        d["seconds"] = s.seconds;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_craml, m) {
    m.doc() = "Keyword-window extraction, rule labelling and clause classification";

    static py::exception<Error> craml_error(m, "CramlError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::usage) PyErr_SetString(PyExc_ValueError, e.what());
            else craml_error(e.what());
        }
    });

    m.def("version", &tool_version);
    m.def(
        "clean_text", [](const std::string& raw) { return clean(raw, CleaningProfile::defaults()); }, py::arg("raw"));
    m.def("extract_chunks", &chunks_of, py::arg("text"), py::arg("keywords"), py::arg("n") = 6,
          "Keyword windows of up to n words either side, deduplicated, in document order.");
    m.def("f1_score", &f1_score, py::arg("precision"), py::arg("recall"));

    py::class_<RuleSet>(m, "RuleSet")
        .def_static(
            "parse", [](const std::string& text) { return RuleSet::parse(text); }, py::arg("text"))
        .def_static("load", &RuleSet::load, py::arg("path"))
        .def_property_readonly("tags", &RuleSet::tags)
        .def("__len__", [](const RuleSet& r) { return r.rules().size(); })
        .def("apply", &apply, py::arg("chunk"))
        .def("to_csv", &RuleSet::to_csv);

    py::class_<ClassifierModel>(m, "Model")
        .def_static("load", &load_model, py::arg("path"))
        .def_readonly("tag", &ClassifierModel::tag)
        .def_property_readonly("family", [](const ClassifierModel& c) { return std::string(to_string(c.family)); })
        .def_property_readonly("f1", [](const ClassifierModel& c) { return c.metrics.f1; })
        .def_readonly("purified", &ClassifierModel::purified)
        .def(
            "predict",
            [](const ClassifierModel& c, const std::vector<std::string>& chunks) {
                auto p = c.predict(std::span<const std::string>(chunks));
                return std::vector<int>(p.begin(), p.end());
            },
            py::arg("chunks"));

    m.def(
        "generate_synthetic",
        [](const std::filesystem::path& dir, std::size_t documents, std::uint64_t seed) {
            SyntheticOptions o;
            o.documents = documents;
            o.seed = seed;
            generate_synthetic(dir, o);
            write_file(dir / "craml.json", synthetic_project_config(seed));
            return dir / "craml.json";
        },
        py::arg("dir"), py::arg("documents") = 2000, py::arg("seed") = 1,
        "Writes a synthetic corpus plus craml.json under dir and returns the config path.");
    m.def("run_pipeline", &run, py::arg("config"), py::arg("steps") = std::vector<std::string>{},
          py::arg("force") = false);
}
