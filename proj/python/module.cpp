// Python bindings for the amclip core. Images are float64 arrays of shape (H, W, 3) in [0, 1];
// flow fields are float32 arrays of shape (H, W, 2) holding (dx, dy).

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "amclip/ensemble.hpp"
#include "amclip/errors.hpp"
#include "amclip/metrics.hpp"
#include "amclip/synthetic.hpp"
#include "amclip/text_encoder.hpp"
#include "amclip/video_encoder.hpp"

namespace py = pybind11;
using namespace amclip;

namespace {

using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FlowArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ArgumentError("image must have shape (H, W, 3)");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

ImageArray from_image(const Image& img) {
  ImageArray a({img.height, img.width, 3});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

FlowField to_flow(const FlowArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 2) throw ArgumentError("flow must have shape (H, W, 2)");
  FlowField f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), f.data.begin());
  return f;
}

FlowArray from_flow(const FlowField& f) {
  FlowArray a({f.height, f.width, 2});
  std::copy(f.data.begin(), f.data.end(), a.mutable_data());
  return a;
}

// (T, H, W, 3) array -> clip.
VideoClip to_clip(const ImageArray& frames, const std::string& id = "clip") {
  if (frames.ndim() != 4 || frames.shape(3) != 3) throw ArgumentError("frames must have shape (T, H, W, 3)");
  VideoClip clip;
  clip.clip_id = id;
  const auto h = static_cast<int>(frames.shape(1)), w = static_cast<int>(frames.shape(2));
  const std::size_t per = static_cast<std::size_t>(h) * w * 3;
  for (py::ssize_t t = 0; t < frames.shape(0); ++t) {
    Image img(h, w);
    std::copy(frames.data() + t * per, frames.data() + (t + 1) * per, img.data.begin());
    clip.frames.push_back(std::move(img));
  }
  return clip;
}

ImageArray from_clip(const VideoClip& clip) {
  const int h = clip.height(), w = clip.width();
  ImageArray a({clip.frame_count(), h, w, 3});
  double* out = a.mutable_data();
  for (const auto& f : clip.frames) out = std::copy(f.data.begin(), f.data.end(), out);
  return a;
}

std::vector<FlowField> flows_or_compute(const VideoClip& clip, const std::optional<FlowArray>& flows,
                                        Modality modality) {
  if (modality == Modality::Rgb) return {};
  if (!flows) return compute_clip_flows(clip);
  if (flows->ndim() != 4 || flows->shape(3) != 2) throw ArgumentError("flows must have shape (T-1, H, W, 2)");
  std::vector<FlowField> out;
  const auto h = static_cast<int>(flows->shape(1)), w = static_cast<int>(flows->shape(2));
  const std::size_t per = static_cast<std::size_t>(h) * w * 2;
  for (py::ssize_t t = 0; t < flows->shape(0); ++t) {
    FlowField f(h, w);
    std::copy(flows->data() + t * per, flows->data() + (t + 1) * per, f.data.begin());
    out.push_back(std::move(f));
  }
  return out;
}

py::dict plan_dict(const SamplingPlan& p) {
  py::dict d;
  d["classifier"] = p.classifier_index;
  d["scheme"] = std::string(to_string(p.scheme));
  d["main_window"] = p.main_window ? py::object(py::make_tuple(p.main_window->start, p.main_window->end))
                                   : py::object(py::none());
  d["frames"] = p.frame_indices;
  return d;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict per_class;
  for (const auto& c : r.classes) {
    per_class[py::str(c.name)] = c.ap ? py::object(py::float_(*c.ap)) : py::object(py::none());
  }
  py::dict d;
  d["ap"] = per_class;
  d["map"] = r.summary.value;
  d["flagged"] = r.summary.flagged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_amclip, m) {
  m.doc() = "Motion-aware video/text classifier ensemble";

  static py::exception<Error> base(m, "AmclipError", PyExc_RuntimeError);
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  static py::exception<DataError> data(m, "DataError", base.ptr());
  static py::exception<NumericError> numeric(m, "NumericError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config.ptr(), e.what());
    } catch (const DataError& e) {
      PyErr_SetString(data.ptr(), e.what());
    } catch (const NumericError& e) {
      PyErr_SetString(numeric.ptr(), e.what());
    }
  });

  m.def("build_plans",
        [](int n, int classifiers, const std::string& scheme, int frames, std::uint64_t seed) {
          py::list out;
          for (const auto& p : build_plans(n, classifiers, parse_scheme(scheme), frames, seed)) out.append(plan_dict(p));
          return out;
        },
        py::arg("n"), py::arg("classifiers"), py::arg("scheme"), py::arg("frames"), py::arg("seed") = 0,
        "Sampling plans for a clip of n frames, one per classifier.");

  m.def("compute_flow",
        [](const ImageArray& a, const ImageArray& b, int levels, int block, int radius) {
          return from_flow(compute_flow(to_image(a), to_image(b), {levels, block, radius}));
        },
        py::arg("a"), py::arg("b"), py::arg("levels") = 3, py::arg("block") = 8, py::arg("radius") = 4);

  m.def("flow_to_image",
        [](const FlowArray& f, double r) { return from_image(flow_to_image(to_flow(f), r)); }, py::arg("flow"),
        py::arg("max_displacement") = 4.0);

  m.def("average_precision",
        [](const std::vector<double>& s, const std::vector<int>& y) { return average_precision(s, y); },
        py::arg("scores"), py::arg("labels"));

  m.def("evaluate",
        [](const std::vector<std::vector<double>>& s, const std::vector<std::vector<int>>& y,
           const std::vector<std::string>& names) { return report_dict(evaluate(s, y, names)); },
        py::arg("scores"), py::arg("labels"), py::arg("class_names"),
        "Per-class AP and mAP; scores and labels are clip-major.");

  m.def("aggregate",
        [](const std::vector<ScoreVector>& scores, double theta) {
          const auto a = aggregate(scores, theta);
          return py::make_tuple(a.mean, a.predicted);
        },
        py::arg("scores"), py::arg("theta") = 0.5, "Mean score vector and indices at or above theta.");

  m.def("bce_loss", [](const std::vector<double>& p, const std::vector<double>& y) { return bce_loss(p, y); },
        py::arg("scores"), py::arg("labels"));

  m.def("synthetic_class_names", &synthetic_class_names);

  m.def("generate_moving_shapes",
        [](int n, int frames, std::uint64_t seed) {
          const auto d = generate_moving_shapes(n, frames, seed);
          py::list out;
          for (std::size_t i = 0; i < d.clips.size(); ++i) {
            py::dict c;
            c["clip_id"] = d.records[i].clip_id;
            c["labels"] = d.records[i].labels;
            c["frames"] = from_clip(d.clips[i]);
            out.append(c);
          }
          return out;
        },
        py::arg("n_clips"), py::arg("frames_per_clip") = 16, py::arg("seed") = 0);

  m.def("write_moving_shapes",
        [](const std::filesystem::path& dir, int n, int frames, std::uint64_t seed) {
          write_dataset(generate_moving_shapes(n, frames, seed), dir);
        },
        py::arg("dir"), py::arg("n_clips"), py::arg("frames_per_clip") = 16, py::arg("seed") = 0,
        "Writes frames and manifest.jsonl under dir.");

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::vector<std::string>& classes, int dim, int heads, int patch,
                       std::pair<int, int> image_size, bool temporal_positions, std::uint64_t seed) {
             EncoderConfig cfg;
             cfg.dim = dim;
             cfg.heads = heads;
             cfg.patch = patch;
             cfg.image_height = image_size.first;
             cfg.image_width = image_size.second;
             cfg.temporal_positions = temporal_positions;
             cfg.validate();
             return Model::create(cfg, LabelVocabulary(classes), seed);
           }),
           py::arg("classes"), py::arg("dim") = 64, py::arg("heads") = 4, py::arg("patch") = 8,
           py::arg("image_size") = std::make_pair(32, 32), py::arg("temporal_positions") = true,
           py::arg("seed") = 0)
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(self, p); }, py::arg("path"))
      .def_property_readonly("classes", [](const Model& self) { return self.classes.classes(); })
      .def_property_readonly("dim", [](const Model& self) { return self.config.dim; })
      .def_property_readonly("parameter_count", [](const Model& self) { return self.params.scalar_count(); })
      .def("class_embeddings",
           [](const Model& self) { return Eigen::MatrixXd(class_text_embeddings(self)); })
      .def("embed_video",
           [](const Model& self, const ImageArray& frames, const std::vector<int>& indices,
              const std::optional<FlowArray>& flows, const std::string& modality, double flow_range) {
             const VideoClip clip = to_clip(frames);
             const Modality mod = parse_modality(modality);
             const auto f = flows_or_compute(clip, flows, mod);
             return Eigen::VectorXd(embed_video(self, build_tokens(clip, f, indices, flow_range, mod)));
           },
           py::arg("frames"), py::arg("indices"), py::arg("flows") = py::none(), py::arg("modality") = "rgb+flow",
           py::arg("flow_range") = 4.0)
      .def("predict",
           [](const Model& self, const ImageArray& frames, const std::string& scheme, int classifiers,
              int frames_per_classifier, std::uint64_t seed, double theta, double tau,
              const std::optional<FlowArray>& flows, const std::string& modality, double flow_range, int workers) {
             const VideoClip clip = to_clip(frames);
             InferenceOptions opts{tau, parse_modality(modality), flow_range, workers};
             const auto f = flows_or_compute(clip, flows, opts.modality);
             const auto plans =
                 build_plans(clip.frame_count(), classifiers, parse_scheme(scheme), frames_per_classifier, seed);
             const auto per = run_classifiers(self, clip, f, plans, opts);
             const auto agg = aggregate(per, theta);
             py::dict d;
             d["mean_scores"] = agg.mean;
             std::vector<std::string> names;
             for (int c : agg.predicted) names.push_back(self.classes.name(static_cast<std::size_t>(c)));
             d["predicted"] = names;
             d["per_classifier"] = per;
             return d;
           },
           py::arg("frames"), py::arg("scheme") = "sparse", py::arg("classifiers") = 4,
           py::arg("frames_per_classifier") = 8, py::arg("seed") = 0, py::arg("theta") = 0.5,
           py::arg("tau") = 0.07, py::arg("flows") = py::none(), py::arg("modality") = "rgb+flow",
           py::arg("flow_range") = 4.0, py::arg("workers") = 1)
      .def("fit",
           [](Model& self, const std::vector<std::pair<ImageArray, std::vector<std::string>>>& clips, int steps,
              int batch_size, double learning_rate, const std::string& optimizer, double tau, std::uint64_t seed,
              const std::string& scheme, int classifiers, int frames_per_classifier, const std::string& modality,
              double flow_range) {
             SamplingSetup sampling{parse_scheme(scheme), classifiers, frames_per_classifier, parse_modality(modality),
                                    flow_range};
             std::vector<PreparedClip> data;
             for (const auto& [frames, labels] : clips) {
               PreparedClip pc;
               pc.clip = to_clip(frames);
               pc.flows = flows_or_compute(pc.clip, std::nullopt, sampling.modality);
               pc.labels = self.classes.encode(labels);
               data.push_back(std::move(pc));
             }
             TrainConfig tc;
             tc.optimizer = parse_optimizer(optimizer);
             tc.learning_rate = learning_rate;
             tc.steps = steps;
             tc.batch_size = batch_size;
             tc.tau = tau;
             tc.seed = seed;
             std::vector<double> losses;
             {
               py::gil_scoped_release release;
               for (const auto& e : fit(self, data, sampling, tc)) losses.push_back(e.loss);
             }
             return losses;
           },
           py::arg("clips"), py::arg("steps") = 100, py::arg("batch_size") = 8, py::arg("learning_rate") = 0.05,
           py::arg("optimizer") = "sgd", py::arg("tau") = 0.07, py::arg("seed") = 0, py::arg("scheme") = "sparse",
           py::arg("classifiers") = 4, py::arg("frames_per_classifier") = 8, py::arg("modality") = "rgb+flow",
           py::arg("flow_range") = 4.0,
           "Trains in place on (frames, labels) pairs; returns the per-step loss.");
}
