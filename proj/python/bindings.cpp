#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lrpseg/beta.hpp"
#include "lrpseg/error.hpp"
#include "lrpseg/lrp.hpp"
#include "lrpseg/metrics.hpp"
#include "lrpseg/segmentation.hpp"
#include "lrpseg/synthetic.hpp"
#include "lrpseg/trainer.hpp"
#include "lrpseg/weights.hpp"

namespace py = pybind11;
using namespace lrpseg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (C, H, W) or (1, C, H, W) float array -> 1 x C x H x W tensor.
Tensor4 to_tensor(const FloatArray& a) {
    if (a.ndim() != 3 && a.ndim() != 4) throw ShapeError("image must be (C, H, W) or (1, C, H, W)");
    const std::size_t off = a.ndim() == 4 ? 1 : 0;
    if (off && a.shape(0) != 1) throw ShapeError("batch dimension must be 1");
    Shape s{1, static_cast<std::size_t>(a.shape(off)), static_cast<std::size_t>(a.shape(off + 1)),
            static_cast<std::size_t>(a.shape(off + 2))};
    return Tensor4(s, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> image_array(const Tensor4& t) {
    const Shape& s = t.shape();
    py::array_t<float> out({s.c, s.h, s.w});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

RelevanceMap to_map(const FloatArray& a) {
    if (a.ndim() != 2) throw ShapeError("map must be 2-D");
    RelevanceMap m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.values.begin());
    return m;
}

template <class T>
py::array_t<T> plane(const std::vector<T>& v, std::size_t h, std::size_t w) {
    py::array_t<T> out({h, w});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<double> to_doubles(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return std::vector<double>(a.data(), a.data() + a.size());
}

std::vector<std::uint8_t> to_bytes(const ByteArray& a) { return std::vector<std::uint8_t>(a.data(), a.data() + a.size()); }

py::dict confusion_dict(const PixelConfusion& c) {
    py::dict d;
    d["tp"] = c.tp;
    d["fp"] = c.fp;
    d["fn"] = c.fn;
    d["tn"] = c.tn;
    d["iou"] = iou(c);
    d["precision"] = precision(c);
    d["recall"] = recall(c);
    return d;
}

Network load_network(const std::filesystem::path& path) {
    WeightContainer w = load_weights(path);
    Architecture arch = Architecture::make(parse_variant(w.manifest.variant));
    return Network(std::move(arch), std::move(w));
}

}  // namespace

PYBIND11_MODULE(_lrpseg, m) {
    m.doc() = "LRP-based weakly supervised damage segmentation";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());

    // ---- data ----
    m.def(
        "generate_scene",
        [](std::uint64_t seed, std::size_t size, bool has_crack) {
            SceneSpec spec;
            spec.seed = seed;
            spec.height = spec.width = size;
            spec.has_crack = has_crack;
            Sample s = generate(spec);
            return py::make_tuple(image_array(s.image), plane(s.mask, size, size));
        },
        py::arg("seed"), py::arg("size") = 64, py::arg("has_crack") = true,
        "Synthetic scene -> (image (3, H, W) float32, truth mask (H, W) uint8).");
    m.def(
        "write_dataset",
        [](const std::filesystem::path& dir, std::size_t n_pos, std::size_t n_neg, std::uint64_t seed,
           std::size_t size) {
            const Dataset d = make_dataset(n_pos, n_neg, seed, size);
            write_dataset(dir, d);
            return py::make_tuple(d.train.size(), d.val.size(), d.test.size());
        },
        py::arg("dir"), py::arg("n_pos") = 100, py::arg("n_neg") = 100, py::arg("seed") = 1, py::arg("size") = 64);

    // ---- network ----
    py::class_<Network>(m, "Network")
        .def_static("load", &load_network, py::arg("path"))
        .def_static(
            "random",
            [](const std::string& variant, std::uint64_t seed) {
                const Architecture arch = Architecture::make(parse_variant(variant));
                return Network(arch, random_weights(arch, seed));
            },
            py::arg("variant") = "toy", py::arg("seed") = 0)
        .def_property_readonly("variant", [](const Network& n) { return to_string(n.architecture().variant); })
        .def_property_readonly("manifest", [](const Network& n) { return n.weights().manifest_text; })
        .def("save", [](const Network& n, const std::filesystem::path& p) { save_weights(n.weights(), p); })
        .def(
            "logits",
            [](const Network& n, const FloatArray& image) { return forward(n, to_tensor(image)).logits; },
            py::arg("image"))
        .def(
            "classify",
            [](const Network& n, const FloatArray& image) {
                return to_string(classify(forward(n, to_tensor(image))).label);
            },
            py::arg("image"))
        .def(
            "explain",
            [](const Network& n, const FloatArray& image, const std::string& rules, std::size_t target) {
                const RuleAssignment a = RuleAssignment::resolve(rules, n.architecture());
                const RelevanceMap map = propagate(forward(n, to_tensor(image)), n, a, target);
                return plane(map.values, map.height, map.width);
            },
            py::arg("image"), py::arg("rules") = "ours", py::arg("target") = 0,
            "Channel-summed pixel relevance for the target class (0 = damage).");

    m.def(
        "train_toy",
        [](const std::filesystem::path& data, const std::filesystem::path& out, std::uint64_t seed,
           std::size_t epochs) {
            auto labeled = [](std::vector<Sample> v) {
                std::vector<LabeledImage> r;
                for (auto& s : v) r.push_back({std::move(s.image), s.label});
                return r;
            };
            TrainConfig cfg = TrainConfig::toy(seed);
            cfg.epochs = epochs;
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(Architecture::toy(), labeled(read_split(data, "train")), labeled(read_split(data, "val")),
                          cfg);
            }
            save_weights(r.weights, out);
            py::list log;
            for (const auto& e : r.log) log.append(py::make_tuple(e.epoch, e.loss, e.balanced_accuracy));
            return log;
        },
        py::arg("data"), py::arg("out"), py::arg("seed") = 1, py::arg("epochs") = 20,
        "Trains the toy net on <data>/train, writes weights, returns (epoch, loss, val BA) rows.");

    // ---- segmentation ----
    m.def("mean_filter_5x5", [](const FloatArray& map) {
        const RelevanceMap f = mean_filter_5x5(to_map(map));
        return plane(f.values, f.height, f.width);
    });
    m.def("isodata_threshold", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
        return isodata_threshold(to_doubles(v)).threshold;
    });
    m.def(
        "segment",
        [](const FloatArray& map, const std::string& method, std::uint64_t seed) {
            const SegmentationMask s = segment(to_map(map), parse_method(method), seed);
            py::object score = py::none();
            if (s.score) score = plane(*s.score, s.height, s.width);
            return py::make_tuple(plane(s.mask, s.height, s.width), score,
                                  s.status == SegmentationStatus::Ok ? "ok" : "warning");
        },
        py::arg("map"), py::arg("method") = "bmm", py::arg("seed") = 0,
        "-> (mask uint8, score float32 or None, status).");
    m.def(
        "fit_bmm",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
            const BmmFit f = fit_bmm(to_doubles(v));
            py::list comps;
            for (const auto& c : f.mixture.components) comps.append(py::make_tuple(c.weight, c.alpha, c.beta));
            return py::make_tuple(comps, f.damage_posterior);
        },
        "-> ([(weight, alpha, beta) background, damage], damage posteriors).");
    m.def(
        "fit_gmm",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& v, std::uint64_t seed) {
            const GmmFit f = fit_gmm(to_doubles(v), seed);
            py::list comps;
            for (const auto& c : f.mixture.components) comps.append(py::make_tuple(c.weight, c.mean, c.variance));
            return py::make_tuple(comps, f.log_likelihood);
        },
        py::arg("values"), py::arg("seed") = 0, "-> ([(weight, mean, variance)] x 3, log-likelihood trace).");
    m.def("beta_pdf", &beta_pdf, py::arg("x"), py::arg("alpha"), py::arg("beta"));
    m.def("beta_cdf", &beta_cdf, py::arg("x"), py::arg("alpha"), py::arg("beta"));

    // ---- metrics ----
    m.def("confusion", [](const ByteArray& pred, const ByteArray& truth) {
        return confusion_dict(confusion(to_bytes(pred), to_bytes(truth)));
    });
    m.def(
        "pr_curve",
        [](const std::vector<FloatArray>& scores, const std::vector<ByteArray>& truths) {
            std::vector<std::vector<float>> s;
            std::vector<std::vector<std::uint8_t>> t;
            for (const auto& a : scores) s.emplace_back(a.data(), a.data() + a.size());
            for (const auto& a : truths) t.push_back(to_bytes(a));
            const PrCurve c = pr_curve(s, t);
            py::list pts;
            for (const auto& p : c.points) pts.append(py::make_tuple(p.threshold, p.precision, p.recall));
            py::dict d;
            d["points"] = pts;
            d["no_skill_precision"] = c.no_skill_precision;
            d["saturated"] = c.saturated;
            return d;
        },
        "Micro-pooled PR curve; points are (threshold, precision, recall).");
}
