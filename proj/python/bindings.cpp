#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstring>

#include "crcseg/calibration.hpp"
#include "crcseg/error.hpp"
#include "crcseg/heatmap.hpp"
#include "crcseg/metrics.hpp"
#include "crcseg/npy.hpp"
#include "crcseg/prediction_sets.hpp"
#include "crcseg/serialization.hpp"
#include "crcseg/synth.hpp"
#include "crcseg/version.hpp"

namespace py = pybind11;
using namespace crcseg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Dims dims3(const py::array& a) {
  if (a.ndim() != 3)
    throw Error(ErrorCode::ShapeRankError, "expected a (K, H, W) array");
  return Dims{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
              static_cast<int>(a.shape(2))};
}

ScoreTensor to_scores(const FloatArray& a, bool validate) {
  const Dims d = dims3(a);
  std::vector<float> v(a.data(), a.data() + a.size());
  return ScoreTensor(d, std::move(v), validate);
}

MultiMask to_multimask(const ByteArray& a) {
  const Dims d = dims3(a);
  return MultiMask(d, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

/// uint8 arrays use 255 for void pixels, wider types 65535.
GroundTruthMask to_mask(const py::array& labels, int k) {
  if (labels.ndim() != 2)
    throw Error(ErrorCode::ShapeRankError, "expected an (H, W) label array");
  const int h = static_cast<int>(labels.shape(0));
  const int w = static_cast<int>(labels.shape(1));
  std::vector<Label> out(static_cast<std::size_t>(h) * w);
  if (labels.dtype().is(py::dtype::of<std::uint8_t>())) {
    auto a = ByteArray::ensure(labels);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = a.data()[i] == 0xFF ? kIgnore : a.data()[i];
  } else {
    auto a = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>::ensure(labels);
    std::copy(a.data(), a.data() + out.size(), out.begin());
  }
  return GroundTruthMask(Dims{k, h, w}, std::move(out));
}

py::array_t<std::uint8_t> from_multimask(const MultiMask& z) {
  const Dims& d = z.dims();
  py::array_t<std::uint8_t> out({d.k, d.h, d.w});
  std::memcpy(out.mutable_data(), z.bits().data(), z.bits().size());
  return out;
}

py::array_t<float> from_scores(const ScoreTensor& s) {
  const Dims& d = s.dims();
  py::array_t<float> out({d.k, d.h, d.w});
  std::memcpy(out.mutable_data(), s.values().data(), s.values().size() * sizeof(float));
  return out;
}

py::array_t<std::uint16_t> from_labels(const GroundTruthMask& m) {
  const Dims& d = m.dims();
  py::array_t<std::uint16_t> out({d.h, d.w});
  std::copy(m.labels().begin(), m.labels().end(), out.mutable_data());
  return out;
}

std::vector<Example> to_examples(const std::vector<FloatArray>& scores,
                                 const std::vector<py::array>& labels, bool validate) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::DimensionMismatch, "scores and labels lists differ in length");
  std::vector<Example> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ScoreTensor s = to_scores(scores[i], validate);
    GroundTruthMask m = to_mask(labels[i], s.dims().k);
    check_pair(s, m);
    out.push_back({std::move(s), std::move(m)});
  }
  return out;
}

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

} // namespace

PYBIND11_MODULE(_crcseg, m) {
  m.doc() = "Conformal risk control for semantic segmentation";
  m.attr("__version__") = std::string(kToolVersion);
  m.attr("IGNORE") = kIgnore;

  py::register_exception<Error>(m, "CrcsegError", PyExc_ValueError);

  py::enum_<LossKind>(m, "LossKind")
      .value("Binary", LossKind::Binary)
      .value("BinaryThreshold", LossKind::BinaryThreshold)
      .value("Miscoverage", LossKind::Miscoverage)
      .value("WeightedMiscoverage", LossKind::WeightedMiscoverage);

  py::class_<LossSpec>(m, "LossSpec")
      .def_readonly("kind", &LossSpec::kind)
      .def_readonly("tau", &LossSpec::tau)
      .def_readonly("weights", &LossSpec::weights)
      .def_readonly("bound_b", &LossSpec::bound_b)
      .def_static("binary", &LossSpec::binary)
      .def_static("binary_threshold", &LossSpec::binary_threshold, py::arg("tau"))
      .def_static("miscoverage", &LossSpec::miscoverage)
      .def_static("weighted_miscoverage", &LossSpec::weighted_miscoverage, py::arg("weights"));

  py::class_<CalibrationConfig>(m, "CalibrationConfig")
      .def(py::init([](double alpha, const LossSpec& loss, double epsilon, bool top1,
                       std::uint64_t seed, unsigned threads) {
             CalibrationConfig c;
             c.alpha = alpha;
             c.loss = loss;
             c.epsilon = epsilon;
             c.top1_fallback = top1;
             c.seed = seed;
             c.threads = threads;
             c.validate();
             return c;
           }),
           py::arg("alpha"), py::arg("loss") = LossSpec::miscoverage(),
           py::arg("epsilon") = 1e-5, py::arg("top1_fallback") = true,
           py::arg("seed") = 0, py::arg("threads") = 0)
      .def_readonly("alpha", &CalibrationConfig::alpha)
      .def_readonly("epsilon", &CalibrationConfig::epsilon)
      .def_readonly("loss", &CalibrationConfig::loss)
      .def_readonly("top1_fallback", &CalibrationConfig::top1_fallback);

  py::class_<CalibrationArtifact>(m, "CalibrationArtifact")
      .def_readonly("lambda_hat", &CalibrationArtifact::lambda_hat)
      .def_readonly("alpha", &CalibrationArtifact::alpha)
      .def_readonly("n", &CalibrationArtifact::n)
      .def_readonly("epsilon", &CalibrationArtifact::epsilon)
      .def_readonly("top1_fallback", &CalibrationArtifact::top1_fallback)
      .def_property_readonly("risk_curve",
                             [](const CalibrationArtifact& a) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto& s : a.risk_curve)
                                 out.emplace_back(s.lambda, s.risk);
                               return out;
                             })
      .def("to_dict", [](const CalibrationArtifact& a) { return to_py(artifact_to_json(a)); })
      .def("save", [](const CalibrationArtifact& a, const std::string& path) {
        write_artifact(path, a);
      });
  m.def("load_artifact", [](const std::string& path) { return read_artifact(path); });

  m.def("threshold_indicator",
        [](double p, double lambda) { return threshold_indicator(p, CoverageParameter(lambda)); },
        py::arg("p"), py::arg("lam"));
  m.def("lac_set",
        [](const FloatArray& scores, double lambda, bool top1_fallback, bool validate) {
          return from_multimask(
              lac_set(to_scores(scores, validate), CoverageParameter(lambda), top1_fallback));
        },
        py::arg("scores"), py::arg("lam"), py::arg("top1_fallback") = true,
        py::arg("validate") = true,
        "Multi-labeled mask (K, H, W) of classes with score >= 1 - lam.");
  m.def("one_hot",
        [](const py::array& labels, int k) { return from_multimask(one_hot(to_mask(labels, k))); },
        py::arg("labels"), py::arg("k"));
  m.def("mask_contains",
        [](const ByteArray& a, const ByteArray& b) {
          return mask_contains(to_multimask(a), to_multimask(b));
        });
  m.def("set_size_map", [](const ByteArray& z) {
    const auto mm = to_multimask(z);
    const auto sizes = set_size_map(mm);
    py::array_t<std::int32_t> out({mm.dims().h, mm.dims().w});
    std::copy(sizes.begin(), sizes.end(), out.mutable_data());
    return out;
  });

  m.def("coverage_ratio", [](const ByteArray& z, const ByteArray& y) {
    return coverage_ratio(to_multimask(z), to_multimask(y));
  });
  m.def("loss_binary", [](const ByteArray& z, const ByteArray& y) {
    return loss_binary(to_multimask(z), to_multimask(y));
  });
  m.def("loss_binary_threshold", [](const ByteArray& z, const ByteArray& y, double tau) {
    return loss_binary_threshold(to_multimask(z), to_multimask(y), tau);
  });
  m.def("loss_miscoverage", [](const ByteArray& z, const ByteArray& y) {
    return loss_miscoverage(to_multimask(z), to_multimask(y));
  });
  m.def("loss_weighted_miscoverage",
        [](const ByteArray& z, const ByteArray& y, const std::vector<double>& w) {
          return loss_weighted_miscoverage(to_multimask(z), to_multimask(y), w);
        });
  m.def("compute_loss", [](const LossSpec& spec, const ByteArray& z, const ByteArray& y) {
    return compute_loss(spec, to_multimask(z), to_multimask(y));
  });

  m.def("empirical_risk", [](const std::vector<double>& losses) { return empirical_risk(losses); });
  m.def("crc_condition", &crc_condition, py::arg("r_hat"), py::arg("n"), py::arg("b"),
        py::arg("alpha"));
  m.def("min_calibration_size", &min_calibration_size, py::arg("alpha"), py::arg("b") = 1.0,
        py::arg("r_hat") = 0.0);
  m.def("calibrate",
        [](const std::vector<FloatArray>& scores, const std::vector<py::array>& labels,
           const CalibrationConfig& config, bool validate) {
          const auto ex = to_examples(scores, labels, validate);
          py::gil_scoped_release release;
          return calibrate(ex, config);
        },
        py::arg("scores"), py::arg("labels"), py::arg("config"), py::arg("validate") = true);
  m.def("evaluate",
        [](const std::vector<FloatArray>& scores, const std::vector<py::array>& labels,
           const CalibrationArtifact& artifact, bool validate) {
          const auto ex = to_examples(scores, labels, validate);
          EvaluationReport r;
          {
            py::gil_scoped_release release;
            r = evaluate(ex, artifact);
          }
          return to_py(report_to_json(r));
        },
        py::arg("scores"), py::arg("labels"), py::arg("artifact"), py::arg("validate") = true);
  m.def("activation_ratio", [](const ByteArray& z, const py::array& labels) {
    const auto mm = to_multimask(z);
    return activation_ratio(mm, validity_map(to_mask(labels, mm.dims().k)));
  });

  m.def("intensity_map",
        [](const ByteArray& z, const std::string& mode) {
          HeatmapOptions opts;
          opts.normalization = mode == "max" ? Normalization::ByObservedMax : Normalization::ByK;
          const auto mm = to_multimask(z);
          const auto v = intensity_map(mm, opts);
          py::array_t<double> out({mm.dims().h, mm.dims().w});
          std::copy(v.begin(), v.end(), out.mutable_data());
          return out;
        },
        py::arg("z"), py::arg("mode") = "k");
  m.def("render", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2)
      throw Error(ErrorCode::ShapeRankError, "expected an (H, W) intensity array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const auto img = render(std::span(a.data(), a.size()), w, h, HeatmapOptions{});
    py::array_t<std::uint8_t> out({h, w, 3});
    std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
    return out;
  });
  m.def("encode_png", [](const ByteArray& rgb) {
    if (rgb.ndim() != 3 || rgb.shape(2) != 3)
      throw Error(ErrorCode::ShapeRankError, "expected an (H, W, 3) uint8 array");
    RgbImage img(static_cast<int>(rgb.shape(1)), static_cast<int>(rgb.shape(0)));
    std::memcpy(img.pixels.data(), rgb.data(), img.pixels.size());
    const auto bytes = encode_png(img);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });

  m.def("read_scores", [](const std::string& p, bool validate) { return from_scores(read_scores(p, validate)); },
        py::arg("path"), py::arg("validate") = true);
  m.def("write_scores", [](const std::string& p, const FloatArray& a) {
    write_scores(p, to_scores(a, false));
  });
  m.def("read_multimask", [](const std::string& p) { return from_multimask(read_multimask(p)); });

  m.def("generate",
        [](int k, int height, int width, std::size_t n_images, int blobs, double temperature,
           double corruption, double noise, std::uint64_t seed) {
          SynthConfig c;
          c.dims = Dims{k, height, width};
          c.n_images = n_images;
          c.blob_count = blobs;
          c.temperature = temperature;
          c.corruption = corruption;
          c.noise = noise;
          c.seed = seed;
          const auto data = generate(c);
          py::list scores, labels;
          for (const auto& ex : data) {
            scores.append(from_scores(ex.scores));
            labels.append(from_labels(ex.mask));
          }
          return py::make_tuple(scores, labels);
        },
        py::arg("k") = 5, py::arg("height") = 64, py::arg("width") = 64,
        py::arg("n_images") = 10, py::arg("blobs") = 8, py::arg("temperature") = 1.0,
        py::arg("corruption") = 0.3, py::arg("noise") = 1.0, py::arg("seed") = 0,
        "Synthetic (scores, labels) lists; labels are uint16 with 65535 for void.");
}
