#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "softseg/metrics.hpp"
#include "softseg/objective.hpp"
#include "softseg/optim.hpp"
#include "softseg/phantom.hpp"
#include "softseg/stats.hpp"
#include "softseg/volio.hpp"

namespace py = pybind11;
using namespace softseg;

namespace {

// numpy <-> library types. Bindings run in float64 to match numpy defaults.

nn::Tensor<double> tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    nn::Tensor<double> t;
    t.shape.assign(a.shape(), a.shape() + a.ndim());
    t.values.assign(a.data(), a.data() + a.size());
    return t;
}

py::array_t<double> array_from_tensor(const nn::Tensor<double>& t) {
    py::array_t<double> out(t.shape);
    std::copy(t.values.begin(), t.values.end(), out.mutable_data());
    return out;
}

Volume volume_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                         std::array<float, 3> spacing) {
    if (a.ndim() != 3) throw ShapeError("expected a 3D array (z, y, x)");
    Volume v({static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))},
             spacing);
    std::copy(a.data(), a.data() + a.size(), v.data.begin());
    return v;
}

py::array_t<float> array_from_volume(const Volume& v) {
    py::array_t<float> out({v.dims[2], v.dims[1], v.dims[0]});
    std::copy(v.data.begin(), v.data.end(), out.mutable_data());
    return out;
}

obj::AWingParams awing_from_kwargs(double epsilon, double alpha, double theta, double omega) {
    obj::AWingParams p;
    p.epsilon = epsilon;
    p.alpha = alpha;
    p.theta = theta;
    p.omega = omega;
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SoftSeg core operations: activations, losses, metrics, phantoms, statistics";

    m.def(
        "norm_relu",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
            return array_from_tensor(obj::norm_relu(tensor_from_array(x)));
        },
        py::arg("x"), "Rectify and normalize by the per-sample max; batched when the input is 4D (NCHW).");

    m.def(
        "sigmoid",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
            return array_from_tensor(obj::sigmoid_act(tensor_from_array(x)));
        },
        py::arg("x"));

    m.def(
        "dice_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& gt, double smooth,
           const std::string& variant) {
            if (variant != "sum" && variant != "squared") throw ConfigError("variant must be sum or squared");
            const auto v = variant == "squared" ? obj::DiceVariant::SquaredDenominator
                                                : obj::DiceVariant::SumDenominator;
            return obj::dice_loss(tensor_from_array(pred), tensor_from_array(gt), smooth, v);
        },
        py::arg("pred"), py::arg("gt"), py::arg("smooth") = 1.0, py::arg("variant") = "sum");

    m.def(
        "adaptive_wing_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& gt, double epsilon,
           double alpha, double theta, double omega) {
            return obj::adaptive_wing_loss(tensor_from_array(pred), tensor_from_array(gt),
                                           awing_from_kwargs(epsilon, alpha, theta, omega));
        },
        py::arg("pred"), py::arg("gt"), py::arg("epsilon") = 1.0, py::arg("alpha") = 2.1,
        py::arg("theta") = 0.5, py::arg("omega") = 8.0);

    m.def(
        "adaptive_wing_grad",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& gt, double epsilon,
           double alpha, double theta, double omega) {
            return array_from_tensor(obj::adaptive_wing_loss_grad(
                tensor_from_array(pred), tensor_from_array(gt), awing_from_kwargs(epsilon, alpha, theta, omega)));
        },
        py::arg("pred"), py::arg("gt"), py::arg("epsilon") = 1.0, py::arg("alpha") = 2.1,
        py::arg("theta") = 0.5, py::arg("omega") = 8.0);

    m.def("cosine_annealing_lr", &nn::cosine_annealing_lr, py::arg("epoch"), py::arg("lr0"), py::arg("t_max"));

    m.def(
        "voxel_metrics",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& gt) {
            const auto vm = eval::voxel_metrics(volume_from_array(pred, {1, 1, 1}),
                                                volume_from_array(gt, {1, 1, 1}));
            py::dict d;
            d["dice"] = vm.dice;
            d["precision"] = vm.precision ? py::object(py::float_(*vm.precision)) : py::none();
            d["recall"] = vm.recall ? py::object(py::float_(*vm.recall)) : py::none();
            d["avd"] = vm.avd ? py::object(py::float_(*vm.avd)) : py::none();
            d["rvd"] = vm.rvd ? py::object(py::float_(*vm.rvd)) : py::none();
            d["mse"] = vm.mse;
            return d;
        },
        py::arg("pred_bin"), py::arg("gt_bin"),
        "Dice/precision/recall/AVD/RVD/MSE in percent on binary (z,y,x) masks.");

    m.def(
        "connected_components",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& mask) {
            const Volume v = volume_from_array(mask, {1, 1, 1});
            const auto cc = eval::connected_components(v);
            py::array_t<int32_t> labels({v.dims[2], v.dims[1], v.dims[0]});
            std::copy(cc.labels.begin(), cc.labels.end(), labels.mutable_data());
            return py::make_tuple(labels, cc.count);
        },
        py::arg("mask_bin"), "18-connectivity labeling (8-connectivity for single-slice inputs).");

    m.def(
        "lesion_metrics",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& gt) {
            const auto lm = eval::lesion_metrics(volume_from_array(pred, {1, 1, 1}),
                                                 volume_from_array(gt, {1, 1, 1}));
            py::dict d;
            d["ltpr"] = lm.ltpr ? py::object(py::float_(*lm.ltpr)) : py::none();
            d["lfdr"] = lm.lfdr ? py::object(py::float_(*lm.lfdr)) : py::none();
            d["gt_components"] = lm.gt_components;
            d["pred_components"] = lm.pred_components;
            return d;
        },
        py::arg("pred_bin"), py::arg("gt_bin"));

    m.def(
        "optimize_threshold",
        [](const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>& preds,
           const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>& gts) {
            std::vector<SoftMask> p, g;
            for (const auto& a : preds) p.emplace_back(volume_from_array(a, {1, 1, 1}));
            for (const auto& a : gts) g.emplace_back(volume_from_array(a, {1, 1, 1}));
            const auto sweep = eval::optimize_threshold(p, g);
            py::dict d;
            d["thresholds"] = sweep.thresholds;
            d["mean_dice"] = sweep.mean_dice;
            d["best_threshold"] = sweep.best_threshold;
            return d;
        },
        py::arg("predictions"), py::arg("gts"),
        "Mean-Dice sweep over thresholds 0.05..0.95; ties go to the lowest threshold.");

    m.def(
        "value_distribution",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred) {
            std::vector<float> values(pred.data(), pred.data() + pred.size());
            const auto d = eval::value_distribution(values);
            py::dict out;
            out["softness"] = d.softness;
            out["n_nonzero"] = d.n_nonzero;
            out["empty"] = d.empty;
            out["kde_x"] = d.kde_x;
            out["kde_y"] = d.kde_y;
            std::vector<int64_t> hist(d.histogram.begin(), d.histogram.end());
            out["histogram"] = hist;
            return out;
        },
        py::arg("pred"));

    m.def(
        "wilcoxon_signed_rank",
        [](const std::vector<double>& a, const std::vector<double>& b, const std::string& method) {
            stats::WilcoxonMethod m_ = stats::WilcoxonMethod::Auto;
            if (method == "exact")
                m_ = stats::WilcoxonMethod::Exact;
            else if (method == "normal")
                m_ = stats::WilcoxonMethod::Normal;
            else if (method != "auto")
                throw ConfigError("method must be auto, exact, or normal");
            const auto r = stats::wilcoxon_signed_rank(a, b, m_);
            py::dict d;
            d["p_value"] = r.p_value;
            d["statistic"] = r.statistic;
            d["n_effective"] = r.n_effective;
            d["degenerate"] = r.degenerate;
            d["method"] = r.method_used == stats::WilcoxonMethod::Exact ? "exact" : "normal";
            return d;
        },
        py::arg("a"), py::arg("b"), py::arg("method") = "auto");

    m.def(
        "generate_phantom",
        [](uint64_t seed, const std::string& task, float extent_mm, int num_slices, int supersample,
           float spacing_xy, float noise_std) {
            phantom::PhantomSpec spec;
            spec.task = task == "lesion" ? phantom::PhantomTask::MultiLesion : phantom::PhantomTask::SingleBlob;
            if (task == "lesion") {
                spec.min_objects = 3;
                spec.max_objects = 6;
                spec.min_size_mm = 2.f;
                spec.max_size_mm = 6.f;
            }
            spec.extent_mm = extent_mm;
            spec.num_slices = num_slices;
            spec.supersample = supersample;
            phantom::CenterProfile center;
            center.id = "py";
            center.spacing_mm = {spacing_xy, spacing_xy, 3.f};
            center.noise_std = noise_std;
            const auto g = phantom::gen_subject(spec, center, seed);
            py::dict d;
            d["image"] = array_from_volume(g.subject.images[0]);
            d["soft_gt"] = array_from_volume(g.subject.gt);
            d["spacing_mm"] = center.spacing_mm;
            py::list shapes;
            for (const auto& e : g.shapes) {
                py::dict s;
                s["cx_mm"] = e.cx_mm;
                s["cy_mm"] = e.cy_mm;
                s["semi_a_mm"] = e.semi_a_mm;
                s["semi_b_mm"] = e.semi_b_mm;
                s["area_mm2"] = e.area_mm2();
                shapes.append(s);
            }
            d["shapes"] = shapes;
            return d;
        },
        py::arg("seed"), py::arg("task") = "blob", py::arg("extent_mm") = 48.f, py::arg("num_slices") = 3,
        py::arg("supersample") = 8, py::arg("spacing_xy") = 1.f, py::arg("noise_std") = 0.f,
        "Synthetic subject with exact partial-volume soft ground truth.");

    m.def(
        "resample",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& vol,
           std::array<float, 3> spacing, std::array<float, 3> target, const std::string& kind) {
            const auto k = kind == "image" ? ResampleKind::Image : ResampleKind::GroundTruth;
            return array_from_volume(resample(volume_from_array(vol, spacing), target, k));
        },
        py::arg("volume"), py::arg("spacing_mm"), py::arg("target_spacing_mm"), py::arg("kind") = "image",
        "Spline (image) or linear-with-area-averaging (ground truth) resampling.");
}
