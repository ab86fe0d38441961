#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aegis/checkpoint.hpp"
#include "aegis/harness.hpp"
#include "aegis/metrics.hpp"
#include "aegis/poincare.hpp"
#include "aegis/synth.hpp"

namespace py = pybind11;
using namespace aegis;

namespace {

using Arr1 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Arr2 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec<double> to_vec(const Arr1& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
    return Vec<double>(a.data(), a.data() + a.shape(0));
}

Mat<double> to_mat(const Arr2& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
    Mat<double> m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + m.size(), m.a.begin());
    return m;
}

py::array_t<double> from_vec(const Vec<double>& v) {
    py::array_t<double> out({static_cast<py::ssize_t>(v.size())});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> from_mat(const Mat<double>& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.a.begin(), m.a.end(), out.mutable_data());
    return out;
}

/// Checkpoint-backed inference handle for python callers.
class Model {
public:
    explicit Model(const std::string& path) : params_(load_checkpoint(path)) {}

    py::dict forward_window(const py::array_t<float, py::array::c_style | py::array::forcecast>& win) {
        if (win.ndim() != 2 || win.shape(1) != kDims)
            throw py::value_error("window must be (n, 6)");
        FlowWindow w;
        w.data = Mat<float>(static_cast<int>(win.shape(0)), kDims);
        std::copy(win.data(), win.data() + w.data.size(), w.data.a.begin());
        DetectionVerdict v = classify_window(w, params_);
        py::dict d;
        d["logit"] = v.logit;
        d["probability"] = v.probability;
        d["entropy_bits"] = v.entropy;
        d["tvd_flag"] = v.tvd_flag;
        d["malicious"] = v.malicious;
        return d;
    }

    py::dict hyper() const {
        py::dict d;
        d["d"] = params_.hyper.d;
        d["d_h"] = params_.hyper.d_h;
        d["d_s"] = params_.hyper.d_s;
        d["n"] = params_.hyper.n;
        return d;
    }

    double baseline_entropy() const { return params_.tvd.baseline_entropy; }
    double tau_threshold() const { return params_.tvd.tau_threshold; }

private:
    ModelParams<float> params_;
};

} // namespace

PYBIND11_MODULE(_aegis, m) {
    m.doc() = "flow-physics anomaly detection core";

    py::register_exception<Error>(m, "AegisError");

    m.def(
        "zoh_discretize",
        [](double a, double b, double delta) { return zoh_discretize(a, b, delta); },
        py::arg("a"), py::arg("b"), py::arg("delta"),
        "Zero-order-hold discretization -> (a_bar, b_bar)");

    m.def(
        "ltc_tau", [](double dt, double tau_theta) { return ltc_tau(dt, tau_theta); },
        py::arg("delta_t"), py::arg("tau_theta"), "IAT-dependent liquid time constant");

    m.def(
        "poincare_project",
        [](const Arr2& w, const Arr1& x) {
            Mat<double> wm = to_mat(w);
            Vec<double> xv = to_vec(x);
            if (static_cast<int>(xv.size()) != wm.cols) throw py::value_error("shape mismatch");
            return from_vec(project(wm, xv.data()));
        },
        py::arg("w"), py::arg("x"), "Project into the unit ball: Wx / (1 + |Wx| + eps)");

    m.def(
        "poincare_distance",
        [](const Arr1& u, const Arr1& v) { return poincare_distance(to_vec(u), to_vec(v)); },
        py::arg("u"), py::arg("v"));

    m.def(
        "position_softmax", [](const Arr1& s) { return from_vec(position_softmax(to_vec(s))); },
        py::arg("scores"));

    m.def(
        "shannon_entropy", [](const Arr1& p) { return shannon_entropy(to_vec(p)); },
        py::arg("probabilities"), "Entropy in bits with 0 log 0 = 0");

    m.def(
        "focal_loss",
        [](double p, int label, double gamma, double alpha) {
            return focal_loss(p, label, gamma, alpha);
        },
        py::arg("p"), py::arg("label"), py::arg("gamma") = 2.0, py::arg("alpha") = 0.75);

    m.def(
        "frozen_scan",
        [](const Arr2& inputs, double a_bar, double b_bar, double c) {
            return from_mat(frozen_scan(to_mat(inputs), a_bar, b_bar, c));
        },
        py::arg("inputs"), py::arg("a_bar"), py::arg("b_bar"), py::arg("c"),
        "Reference SSM recurrence with frozen scalar coefficients");

    m.def(
        "compute_metrics",
        [](uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn) {
            MetricsReport r = compute_metrics(ConfusionCounts{tp, fp, tn, fn});
            py::dict d;
            d["tpr"] = r.tpr;
            d["fpr"] = r.fpr;
            d["precision"] = r.precision;
            d["f1"] = r.f1;
            return d;
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

    m.def(
        "read_windows",
        [](const std::string& path) {
            WindowFile f = read_windows(path);
            py::list out;
            for (const FlowWindow& w : f.windows) {
                py::dict d;
                d["flow_id"] = w.flow_id;
                d["start_time"] = w.start_time;
                d["label"] = static_cast<int>(w.label);
                py::array_t<float> data({w.data.rows, w.data.cols});
                std::copy(w.data.a.begin(), w.data.a.end(), data.mutable_data());
                d["data"] = data;
                out.append(d);
            }
            py::dict res;
            res["n"] = f.n;
            res["windows"] = out;
            return res;
        },
        py::arg("path"), "Load a window-tensor file");

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def("forward", &Model::forward_window, py::arg("window"),
             "Run one normalized (n, 6) window; returns verdict fields")
        .def_property_readonly("hyper", &Model::hyper)
        .def_property_readonly("baseline_entropy", &Model::baseline_entropy)
        .def_property_readonly("tau_threshold", &Model::tau_threshold);
}
