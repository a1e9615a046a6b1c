#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"
#include "mtlprune/metrics.hpp"

namespace py = pybind11;
using namespace mtlprune;

namespace {

// Runs a command with its progress log captured; echoes it when asked.
template <typename F>
auto logged(bool verbose, F&& f) {
    std::ostringstream log;
    auto result = [&] {
        py::gil_scoped_release release;
        return f(log);
    }();
    if (verbose) py::print(log.str(), py::arg("end") = "");
    return result;
}

template <typename T>
std::vector<T> flat(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

std::vector<Normal> normals_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw ShapeError("normals must have shape (N, 3)");
    std::vector<Normal> out(static_cast<std::size_t>(a.shape(0)));
    const double* p = a.data();
    for (auto& n : out) {
        n = {p[0], p[1], p[2]};
        p += 3;
    }
    return out;
}

template <typename T>
py::array_t<T> array_of(const std::vector<T>& v, std::vector<py::ssize_t> shape) {
    py::array_t<T> a(shape);
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

}  // namespace

PYBIND11_MODULE(_mtlprune, m) {
    m.doc() = "Multi-task CNN training and structured filter pruning";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
    py::register_exception<PruneError>(m, "PruneError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());

    py::class_<ExperimentConfig>(m, "Config")
        .def_readonly("seed", &ExperimentConfig::seed)
        .def_readonly("precision", &ExperimentConfig::precision)
        .def_readonly("output_dir", &ExperimentConfig::output_dir)
        .def("to_json", [](const ExperimentConfig& c) { return c.raw.dump(); });

    m.def("parse_config", [](const std::string& text) { return parse_config(json::parse(text)); }, py::arg("json_text"),
          "Validate a JSON config document.");
    m.def("load_config", &load_config, py::arg("path"), py::arg("seed") = std::nullopt,
          "Read a config file, apply the seed override and the output-root environment variable.");

    m.def("gen_data", [](const ExperimentConfig& c, bool v) { return logged(v, [&](auto& log) { return cmd_gen_data(c, log); }); },
          py::arg("config"), py::arg("verbose") = false);
    m.def("train", [](const ExperimentConfig& c, bool v) { return logged(v, [&](auto& log) { return cmd_train(c, log); }); },
          py::arg("config"), py::arg("verbose") = false);
    m.def(
        "prune",
        [](const ExperimentConfig& c, std::optional<std::string> criterion, std::optional<std::filesystem::path> base,
           bool from_scratch, std::optional<std::string> name, bool v) {
            const PruneCommandOptions opts{std::move(criterion), std::move(base), from_scratch, std::move(name)};
            return logged(v, [&](auto& log) { return cmd_prune(c, opts, log); });
        },
        py::arg("config"), py::arg("criterion") = std::nullopt, py::arg("base") = std::nullopt,
        py::arg("from_scratch") = false, py::arg("name") = std::nullopt, py::arg("verbose") = false);
    m.def(
        "retrain",
        [](const ExperimentConfig& c, const std::filesystem::path& manifest, std::optional<std::string> name, bool v) {
            return logged(v, [&](auto& log) { return cmd_retrain(c, manifest, name, log); });
        },
        py::arg("config"), py::arg("manifest"), py::arg("name") = std::nullopt, py::arg("verbose") = false);
    m.def(
        "evaluate",
        [](const ExperimentConfig& c, const std::filesystem::path& ckpt, const std::string& split, bool v) {
            return logged(v, [&](auto& log) { return cmd_eval(c, ckpt, split, log); });
        },
        py::arg("config"), py::arg("checkpoint"), py::arg("split") = "val", py::arg("verbose") = false);
    m.def(
        "report",
        [](const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out, const std::string& baseline,
           double tolerance, const std::string& aggregate, bool v) {
            if (aggregate != "best" && aggregate != "mean") throw ConfigError("aggregate must be 'best' or 'mean'");
            const ReportSettings s{baseline, tolerance, aggregate == "best" ? Aggregate::best : Aggregate::mean};
            return logged(v, [&](auto& log) { return cmd_report(runs, s, out, log); });
        },
        py::arg("runs"), py::arg("out"), py::arg("baseline") = "taylor_squared", py::arg("tolerance") = 0.02,
        py::arg("aggregate") = "best", py::arg("verbose") = false);
    m.def("selftest", [] {
        std::ostringstream log;
        bool ok;
        {
            py::gil_scoped_release release;
            ok = cmd_selftest(log);
        }
        return py::make_tuple(ok, log.str());
    });

    m.def("percent_delta", &percent_delta, py::arg("baseline"), py::arg("other"));
    m.def("metric_columns", [] {
        const auto& names = MetricsReport::column_names();
        return std::vector<std::string>(names.begin(), names.end());
    });

    m.def(
        "seg_metrics",
        [](py::array_t<std::int32_t, py::array::c_style | py::array::forcecast> pred,
           py::array_t<std::int32_t, py::array::c_style | py::array::forcecast> gt, int classes) {
            const auto r = seg_metrics(flat(pred), flat(gt), classes);
            return py::dict(py::arg("pixel_acc") = r.pixel_accuracy, py::arg("miou") = r.miou);
        },
        py::arg("pred"), py::arg("gt"), py::arg("classes"));
    m.def(
        "depth_metrics",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> pred,
           py::array_t<double, py::array::c_style | py::array::forcecast> gt) {
            const auto r = depth_metrics(flat(pred), flat(gt));
            return py::dict(py::arg("abs") = r.abs_err, py::arg("rel") = r.rel_err,
                            py::arg("delta_within") = r.delta_within);
        },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "normal_metrics",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> pred,
           py::array_t<double, py::array::c_style | py::array::forcecast> gt) {
            const auto r = normal_metrics(normals_from(pred), normals_from(gt));
            return py::dict(py::arg("mean_deg") = r.angle_mean_deg, py::arg("median_deg") = r.angle_median_deg,
                            py::arg("within") = r.within);
        },
        py::arg("pred"), py::arg("gt"));

    m.def(
        "score_cosprune",
        [](const std::vector<std::vector<double>>& grads, bool all_pairs) {
            return score_cosprune<double>(grads, all_pairs);
        },
        py::arg("task_grads"), py::arg("all_pairs") = false,
        "Sum of pairwise cosine similarities between one filter's per-task gradients.");

    m.def(
        "generate_sample",
        [](const ExperimentConfig& c, std::size_t index) {
            const auto& d = c.dataset;
            const auto s = generate_sample(d, index);
            const py::ssize_t h = d.height, w = d.width;
            py::dict out;
            out["image"] = array_of(s.image, {3, h, w});
            out["seg"] = array_of(s.seg, {h, w});
            out["depth"] = array_of(s.depth, {h, w});
            out["normals"] = array_of(s.normals, {3, h, w});
            return out;
        },
        py::arg("config"), py::arg("index"), "Render one sample of the configured synthetic dataset.");
}
