// Python bindings. Images are (H, W, 3) uint8 arrays, traces and masks
// (H, W) uint8 arrays with 255 meaning unlabeled / void.

#include <tracegrow/evaluation.h>
#include <tracegrow/image_io.h>
#include <tracegrow/rgr.h>
#include <tracegrow/trace.h>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tracegrow;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RgbImage toRgb(const U8Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) {
        throw py::value_error("image must have shape (H, W, 3)");
    }
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    RgbImage img(w, h);
    const std::uint8_t* p = a.data();
    for (std::size_t i = 0; i < img.size(); ++i) {
        img[i] = Rgb{p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    }
    return img;
}

Plane<std::uint8_t> toPlane(const U8Array& a, const char* what) {
    if (a.ndim() != 2) {
        throw py::value_error(std::string(what) + " must have shape (H, W)");
    }
    const auto* p = a.data();
    return Plane<std::uint8_t>(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                               std::vector<std::uint8_t>(p, p + a.size()));
}

U8Array fromPlane(const Plane<std::uint8_t>& plane) {
    U8Array out({plane.height(), plane.width()});
    std::copy(plane.values().begin(), plane.values().end(), out.mutable_data());
    return out;
}

py::bytes toBytes(const Bytes& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::set<std::uint8_t> categorySet(const std::optional<std::vector<int>>& cats,
                                   const LabelMask& pred, const LabelMask& gt) {
    if (!cats) {
        return presentCategories(pred, gt);
    }
    std::set<std::uint8_t> out;
    for (int c : *cats) {
        if (c < 0 || c > 254) throw py::value_error("category ids must lie in [0, 254]");
        out.insert(static_cast<std::uint8_t>(c));
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_tracegrow, m) {
    m.doc() = "Scribble-to-mask refinement by Monte Carlo region growing";

    // Held for the life of the process; the module never unloads.
    static PyObject* error =
        py::exception<Error>(m, "TracegrowError", PyExc_ValueError).inc_ref().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error, (std::string(toString(e.code())) + ": " + e.what()).c_str());
        }
    });

    m.def("to_lab", [](int r, int g, int b) {
        const Lab lab = toLab(Rgb{std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)});
        return py::make_tuple(lab.L, lab.a, lab.b);
    }, py::arg("r"), py::arg("g"), py::arg("b"));

    m.def("seed_count", &seedCount, py::arg("labeled_count"), py::arg("fraction"));

    m.def(
        "refine",
        [](const U8Array& image, const U8Array& trace, double seedFraction, int iterations,
           std::uint64_t rngSeed, double colorScale, std::optional<double> spatialScale,
           int threads, int numCategories) {
            RgrConfig cfg;
            cfg.seedFraction = seedFraction;
            cfg.mcIterations = iterations;
            cfg.rngSeed = rngSeed;
            cfg.colorScale = colorScale;
            cfg.spatialScale = spatialScale;
            cfg.workerThreads = threads;
            const RgbImage img = toRgb(image);
            const TraceRaster tr(toPlane(trace, "trace"));
            Refinement r;
            {
                py::gil_scoped_release release;
                r = tracegrow::refine(img, tr, cfg, numCategories);
            }
            const auto& lt = r.likelihood;
            py::array_t<float> likelihood({lt.height(), lt.width(), lt.numCategories()});
            float* out = likelihood.mutable_data();
            const auto counts = lt.counts();
            for (std::size_t i = 0; i < counts.size(); ++i) {
                out[i] = static_cast<float>(counts[i]) / static_cast<float>(lt.iterations());
            }
            return py::make_tuple(fromPlane(r.mask), likelihood);
        },
        py::arg("image"), py::arg("trace"), py::arg("seed_fraction") = 0.75,
        py::arg("iterations") = 8, py::arg("rng_seed") = 0, py::arg("color_scale") = 20.0,
        py::arg("spatial_scale") = py::none(), py::arg("threads") = 1,
        py::arg("num_categories") = 0,
        "Returns (mask (H, W) uint8, likelihood (H, W, C) float32).");

    m.def(
        "rasterize",
        [](const std::string& strokeListJson, int width, int height) {
            const auto strokes = parseStrokeList(strokeListJson);
            return fromPlane(rasterFromStrokes(width, height, strokes));
        },
        py::arg("stroke_list_json"), py::arg("width"), py::arg("height"));

    m.def(
        "iou",
        [](const U8Array& pred, const U8Array& gt, std::optional<std::vector<int>> categories) {
            const LabelMask p(toPlane(pred, "pred"));
            const LabelMask g(toPlane(gt, "gt"));
            const IouReport r = tracegrow::iou(p, g, categorySet(categories, p, g));
            std::map<int, double> per;
            for (const auto& [c, v] : r.perCategoryIou) per[c] = v;
            return py::make_tuple(r.meanIou, per);
        },
        py::arg("pred"), py::arg("gt"), py::arg("categories") = py::none(),
        "Returns (mean IoU, {category: IoU}).");

    m.def("expected_time", &expectedTime, py::arg("object_count"));
    m.def("bonus", &bonus, py::arg("elapsed_seconds"), py::arg("object_count"));
    m.def("base_score", &baseScore, py::arg("mean_iou"));
    m.def(
        "final_score",
        [](double meanIou, double elapsed, int objects) {
            return finalScore(ScoreInput{meanIou, elapsed, objects}).finalScore;
        },
        py::arg("mean_iou"), py::arg("elapsed_seconds"), py::arg("object_count") = 1);
    m.def(
        "checkpoint_gate",
        [](double meanIou, double threshold) {
            IouReport r;
            r.meanIou = meanIou;
            return checkpointGate(r, threshold);
        },
        py::arg("mean_iou"), py::arg("threshold") = kDefaultCheckpointThreshold);

    m.def(
        "encode_mask_png",
        [](const U8Array& mask, int categories) {
            return toBytes(encodeMaskPng(toPlane(mask, "mask"), Palette::pascalVoc(categories)));
        },
        py::arg("mask"), py::arg("categories") = 21);
    m.def(
        "decode_mask_png",
        [](const py::bytes& data) {
            const std::string s = data;
            return fromPlane(decodeMaskPng(
                std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
        },
        py::arg("data"));
}
