// Python bindings for the core operations: scene synthesis, the latent
// codec, role control, training/sampling, checkpoints, and metrics.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "omnivdiff/pipeline.hpp"

namespace py = pybind11;
using namespace ovd;

namespace {

py::array_t<float> make_array(const std::vector<float>& data, std::vector<py::ssize_t> shape) {
  py::array_t<float> arr(shape);
  std::copy(data.begin(), data.end(), arr.mutable_data());
  return arr;
}

py::array_t<uint8_t> make_array_u8(const std::vector<uint8_t>& data,
                                   std::vector<py::ssize_t> shape) {
  py::array_t<uint8_t> arr(shape);
  std::copy(data.begin(), data.end(), arr.mutable_data());
  return arr;
}

template <typename T>
std::vector<T> flatten(const py::array_t<T, py::array::c_style | py::array::forcecast>& arr) {
  return std::vector<T>(arr.data(), arr.data() + arr.size());
}

RunConfig config_from_dict(const py::dict& d) {
  RunConfig cfg;
  for (auto item : d)
    cfg.set(py::cast<std::string>(item.first), py::cast<std::string>(py::str(item.second)));
  cfg.validate();
  return cfg;
}

struct PyModel {
  OmniDiT<float> model;
  RunConfig cfg;
};

py::dict video_to_dict(const MultiModalVideo& v) {
  py::dict d;
  d["rgb"] = make_array(v.rgb, {v.frames, v.height, v.width, 3});
  d["depth"] = make_array(v.depth, {v.frames, v.height, v.width});
  d["seg"] = make_array_u8(v.seg, {v.frames, v.height, v.width});
  d["edges"] = make_array_u8(v.edges, {v.frames, v.height, v.width});
  d["caption"] = v.caption;
  return d;
}

MultiModalVideo video_from_dict(const py::dict& d) {
  MultiModalVideo v;
  auto rgb = py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(d["rgb"]);
  if (rgb.ndim() != 4 || rgb.shape(3) != 3)
    throw std::invalid_argument("rgb must have shape (frames, height, width, 3)");
  v.frames = rgb.shape(0);
  v.height = rgb.shape(1);
  v.width = rgb.shape(2);
  v.rgb = flatten(rgb);
  v.depth = flatten(
      py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(d["depth"]));
  v.seg = flatten(
      py::cast<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>(d["seg"]));
  v.edges = flatten(
      py::cast<py::array_t<uint8_t, py::array::c_style | py::array::forcecast>>(d["edges"]));
  v.caption = py::cast<std::vector<int64_t>>(d["caption"]);
  int64_t px = v.pixels();
  if (static_cast<int64_t>(v.depth.size()) != px || static_cast<int64_t>(v.seg.size()) != px ||
      static_cast<int64_t>(v.edges.size()) != px)
    throw std::invalid_argument("modality planes disagree on (frames, height, width)");
  return v;
}

}  // namespace

PYBIND11_MODULE(_omnivdiff, m) {
  m.doc() = "multi-modal video diffusion toolkit";

  m.attr("vocabulary") = std::vector<std::string>(kVocabulary.begin(), kVocabulary.end());
  m.attr("modalities") = std::vector<std::string>(kModalityNames, kModalityNames + kNumModalities);
  m.attr("tasks") = std::vector<std::string>(kTaskNames, kTaskNames + kNumTasks);

  m.def("vocab_id", &vocab_id, py::arg("word"));

  m.def(
      "render_scene",
      [](uint64_t seed, int64_t frames, int64_t height, int64_t width) {
        SceneConfig cfg;
        cfg.frames = frames;
        cfg.height = height;
        cfg.width = width;
        return video_to_dict(render(sample_scene(seed, cfg)));
      },
      py::arg("seed"), py::arg("frames") = 8, py::arg("height") = 32, py::arg("width") = 32,
      "Render one procedural scene into aligned rgb/depth/seg/edges planes.");

  m.def(
      "write_sample",
      [](const py::dict& video, const std::string& path) {
        write_sample(video_from_dict(video), path);
      },
      py::arg("video"), py::arg("path"));
  m.def(
      "read_sample", [](const std::string& path) { return video_to_dict(read_sample(path)); },
      py::arg("path"));

  m.def(
      "encode",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& color, int64_t fh,
         int64_t fw, int64_t ft) {
        if (color.ndim() != 4 || color.shape(3) != 3)
          throw std::invalid_argument("color must have shape (frames, height, width, 3)");
        CodecConfig cfg{fh, fw, ft};
        LatentDims d = latent_dims(color.shape(0), color.shape(1), color.shape(2), cfg);
        std::vector<double> latent =
            ovd::encode(flatten(color), color.shape(0), color.shape(1), color.shape(2), cfg);
        py::array_t<double> out({d.F, d.H, d.W, d.C});
        std::copy(latent.begin(), latent.end(), out.mutable_data());
        return out;
      },
      py::arg("color"), py::arg("fh") = 4, py::arg("fw") = 4, py::arg("ft") = 2,
      "Space-time-to-channel patchify of a color video, values mapped to [-1, 1].");

  m.def(
      "decode",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& latent,
         int64_t frames, int64_t height, int64_t width, int64_t fh, int64_t fw, int64_t ft,
         bool clamp) {
        CodecConfig cfg{fh, fw, ft};
        std::vector<float> color(ovd::decode(
            std::vector<double>(latent.data(), latent.data() + latent.size()), frames, height,
            width, cfg, clamp));
        return make_array(color, {frames, height, width, 3});
      },
      py::arg("latent"), py::arg("frames"), py::arg("height"), py::arg("width"),
      py::arg("fh") = 4, py::arg("fw") = 4, py::arg("ft") = 2, py::arg("clamp") = false,
      "Exact inverse of encode.");

  m.def(
      "blend",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& eps, double t,
         bool conditioning) {
        std::vector<double> out =
            ovd::blend(std::vector<double>(x.data(), x.data() + x.size()),
                       std::vector<double>(eps.data(), eps.data() + eps.size()), t,
                       conditioning ? Role::Conditioning : Role::Generation);
        py::array_t<double> arr({static_cast<py::ssize_t>(out.size())});
        std::copy(out.begin(), out.end(), arr.mutable_data());
        return arr;
      },
      py::arg("x"), py::arg("eps"), py::arg("t"), py::arg("conditioning") = false);

  m.def(
      "assign_roles",
      [](const std::string& task) {
        RoleAssignment r = ovd::assign_roles(task_from_name(task));
        std::vector<std::string> out;
        for (Role role : r.roles)
          out.push_back(role == Role::Generation ? "generation" : "conditioning");
        return out;
      },
      py::arg("task"), "Per-modality roles (rgb, depth, seg, edges) for a task.");

  m.def(
      "depth_metrics",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& gt, bool align) {
        double absrel, delta1;
        ovd::depth_metrics(flatten(pred), flatten(gt), absrel, delta1, align);
        return py::make_tuple(absrel, delta1);
      },
      py::arg("pred"), py::arg("gt"), py::arg("align") = true);

  m.def(
      "seg_miou",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& gt) {
        return ovd::seg_miou(flatten(pred), flatten(gt));
      },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "edge_f1",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& gt,
         int64_t frames, int64_t height, int64_t width, int64_t tol) {
        return ovd::edge_f1(flatten(pred), flatten(gt), frames, height, width, tol);
      },
      py::arg("pred"), py::arg("gt"), py::arg("frames"), py::arg("height"), py::arg("width"),
      py::arg("tol") = 1);

  m.def(
      "psnr",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& gt) {
        return ovd::psnr(flatten(pred), flatten(gt));
      },
      py::arg("pred"), py::arg("gt"));

  py::class_<PyModel>(m, "Model")
      .def_static(
          "create",
          [](const py::dict& config, uint64_t seed) {
            PyModel pm;
            pm.cfg = config_from_dict(config);
            pm.model = OmniDiT<float>::init(pm.cfg.model(), seed);
            return pm;
          },
          py::arg("config") = py::dict(), py::arg("seed") = 0)
      .def_static(
          "load",
          [](const std::string& path, const py::dict& config) {
            PyModel pm;
            pm.cfg = config_from_dict(config);
            auto [model, meta] = load_checkpoint_checked(path, pm.cfg.model());
            pm.model = std::move(model);
            return pm;
          },
          py::arg("path"), py::arg("config") = py::dict())
      .def(
          "save",
          [](const PyModel& pm, const std::string& path, int64_t step) {
            CheckpointMeta meta;
            meta.model = pm.model.cfg;
            meta.step = step;
            save_checkpoint(pm.model, meta, path);
          },
          py::arg("path"), py::arg("step") = 0)
      .def_property_readonly("param_count",
                             [](const PyModel& pm) { return pm.model.param_count(); })
      .def(
          "train",
          [](PyModel& pm, const std::vector<py::dict>& videos, int64_t steps) {
            std::vector<MultiModalVideo> vids;
            for (const auto& d : videos) vids.push_back(video_from_dict(d));
            auto encoded = pipeline::encode_dataset(vids, pm.cfg.codec());
            std::ostringstream log;
            pm.model = pipeline::train_model(pm.cfg, encoded, &log, &pm.model, 0, steps);
            std::vector<double> losses;
            std::istringstream is(log.str());
            std::string line;
            while (std::getline(is, line)) {
              auto a = line.find(','), b = line.find(',', line.find(',') + 1);
              losses.push_back(std::stod(line.substr(a + 1, b - a - 1)));
            }
            return losses;
          },
          py::arg("videos"), py::arg("steps") = -1,
          "Train in place on rendered videos; returns the per-step losses.")
      .def(
          "sample",
          [](const PyModel& pm, const std::string& task, const py::object& cond_video,
             const std::vector<int64_t>& caption, uint64_t seed) {
            TaskKind t = task_from_name(task);
            std::optional<std::vector<double>> cond;
            if (!cond_video.is_none()) {
              MultiModalVideo src = video_from_dict(py::cast<py::dict>(cond_video));
              Modality cm = static_cast<Modality>(static_cast<int>(t) - 1);
              cond = ovd::encode(to_color(src, cm), src.frames, src.height, src.width,
                                 pm.cfg.codec());
            }
            pipeline::SampleOutput out = pipeline::run_sampling(pm.model, t, cond, caption,
                                                                pm.cfg, seed);
            return video_to_dict(out.video);
          },
          py::arg("task"), py::arg("cond_video") = py::none(),
          py::arg("caption") = std::vector<int64_t>{}, py::arg("seed") = 0)
      .def(
          "evaluate",
          [](const PyModel& pm, const std::vector<py::dict>& videos, const std::string& task) {
            std::vector<MultiModalVideo> vids;
            for (const auto& d : videos) vids.push_back(video_from_dict(d));
            MetricReport r =
                pipeline::evaluate(pm.model, vids, task_from_name(task), pm.cfg);
            py::dict out;
            out["absrel"] = r.absrel;
            out["delta1"] = r.delta1;
            out["miou"] = r.miou;
            out["edge_f1"] = r.edge_f1;
            out["psnr"] = r.psnr;
            out["n_samples"] = r.n_samples;
            return out;
          },
          py::arg("videos"), py::arg("task"));
}
