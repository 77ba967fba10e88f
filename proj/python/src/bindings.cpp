#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <torch/torch.h>

#include "floodforensics/checkpoint.hpp"
#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/errors.hpp"
#include "floodforensics/losses.hpp"
#include "floodforensics/metrics.hpp"
#include "floodforensics/models.hpp"
#include "floodforensics/robustness.hpp"
#include "floodforensics/run_config.hpp"

namespace py = pybind11;
namespace ff = floodforensics;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ff::ImageTensor to_image(const F32& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ff::ShapeError("image must be an HxWx3 array");
  ff::ImageTensor img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

F32 from_image(const ff::ImageTensor& img) {
  F32 out({img.height(), img.width(), 3});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

ff::FloodMask to_mask(const U8& a) {
  if (a.ndim() != 2) throw ff::ShapeError("mask must be an HxW array");
  std::vector<std::uint8_t> v(a.data(), a.data() + a.size());
  for (auto& x : v) x = x != 0;
  return ff::FloodMask(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), std::move(v));
}

torch::Tensor to_tensor(const F64& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

torch::Tensor to_tensor(const F32& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

F32 to_numpy(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  F32 out(shape);
  std::copy(c.data_ptr<float>(), c.data_ptr<float>() + c.numel(), out.mutable_data());
  return out;
}

py::dict record_to_dict(const ff::SampleRecord& r) {
  py::dict d;
  d["image_path"] = r.image_path;
  d["label"] = r.label;
  d["mask_path"] = r.mask_path ? py::cast(*r.mask_path) : py::none();
  d["source"] = std::string(ff::to_string(r.source));
  d["split"] = r.split ? py::cast(std::string(ff::to_string(*r.split))) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Detection and localization of synthetic flood imagery";

  auto base = py::register_exception<ff::Error>(m, "Error");
  py::register_exception<ff::InvalidConfig>(m, "InvalidConfig", base.ptr());
  py::register_exception<ff::ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ff::ManifestEmpty>(m, "ManifestEmpty", base.ptr());
  py::register_exception<ff::SplitTooSmall>(m, "SplitTooSmall", base.ptr());
  py::register_exception<ff::MetricUndefined>(m, "MetricUndefined", base.ptr());
  py::register_exception<ff::CheckpointMismatch>(m, "CheckpointMismatch", base.ptr());

  // Losses
  m.def(
      "detection_loss", [](const F64& s, const F64& y) { return ff::detection_loss(to_tensor(s), to_tensor(y)).item<double>(); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "localization_loss",
      [](const F64& maps, const F64& gt) { return ff::localization_loss(to_tensor(maps), to_tensor(gt)).item<double>(); },
      py::arg("maps"), py::arg("gt_masks"));
  m.def(
      "total_loss",
      [](double det, double loc, double lambda_det, double lambda_loc) {
        return ff::total_loss(det, loc, ff::LossWeights{lambda_det, lambda_loc});
      },
      py::arg("l_det"), py::arg("l_loc"), py::arg("lambda_det") = 0.4, py::arg("lambda_loc") = 0.6);

  // Metrics
  m.def(
      "auc", [](const std::vector<double>& pos, const std::vector<double>& neg) { return ff::auc(pos, neg); },
      py::arg("pos_scores"), py::arg("neg_scores"));
  m.def(
      "balanced_pixel_accuracy",
      [](const U8& pred, const U8& gt) { return ff::balanced_pixel_accuracy(to_mask(pred), to_mask(gt)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "iou", [](const U8& pred, const U8& gt) { return ff::iou(to_mask(pred), to_mask(gt)); }, py::arg("pred"),
      py::arg("gt"));

  // Attacks (images are HxWx3 float arrays in [0,1])
  m.def(
      "jpeg_compress", [](const F32& img, int q) { return from_image(ff::jpeg_compress(to_image(img), q)); },
      py::arg("image"), py::arg("quality"));
  m.def(
      "resize_down", [](const F32& img, double f) { return from_image(ff::resize_down(to_image(img), f)); },
      py::arg("image"), py::arg("factor"));
  m.def(
      "median_filter", [](const F32& img, int w) { return from_image(ff::median_filter(to_image(img), w)); },
      py::arg("image"), py::arg("window"));
  m.def(
      "gaussian_blur",
      [](const F32& img, int w, double sigma) { return from_image(ff::gaussian_blur(to_image(img), w, sigma)); },
      py::arg("image"), py::arg("window"), py::arg("sigma") = 0.8);
  m.def(
      "gaussian_noise",
      [](const F32& img, double mean, double var, std::uint64_t seed) {
        return from_image(ff::gaussian_noise(to_image(img), mean, var, seed));
      },
      py::arg("image"), py::arg("mean"), py::arg("variance"), py::arg("seed"));
  m.def("gaussian_kernel", &ff::gaussian_kernel, py::arg("window"), py::arg("sigma"));
  m.def(
      "apply_attack",
      [](const std::string& spec_json, const F32& img, std::uint64_t index) {
        const auto spec = ff::attack_spec_from_json(nlohmann::json::parse(spec_json));
        return from_image(ff::apply_attack(spec, to_image(img), index));
      },
      py::arg("spec_json"), py::arg("image"), py::arg("image_index") = 0);
  m.def(
      "psnr", [](const F32& a, const F32& b) { return ff::psnr(to_image(a), to_image(b)); }, py::arg("a"), py::arg("b"));

  // Preprocessing
  m.def(
      "normalize",
      [](const F32& img) { return from_image(ff::normalize(to_image(img), ff::PreprocessConfig{})); },
      py::arg("image"), "Normalize a unit-domain image with the default ImageNet statistics.");
  m.def(
      "resize_bilinear", [](const F32& img, int h, int w) { return from_image(ff::resize_bilinear(to_image(img), h, w)); },
      py::arg("image"), py::arg("height"), py::arg("width"));
  m.def(
      "augment",
      [](const F32& img, std::array<float, 3> factors, std::uint64_t seed) {
        return from_image(ff::augment(to_image(img), factors, seed));
      },
      py::arg("image"), py::arg("factors"), py::arg("seed"));
  m.def("derive_seed", &ff::derive_seed, py::arg("base"), py::arg("a"), py::arg("b") = 0);

  // Manifests
  m.def(
      "build_manifest",
      [](const std::filesystem::path& images, int label, std::optional<std::filesystem::path> masks,
         const std::string& source, const std::string& out) {
        const auto manifest = ff::build_manifest(images, label, masks, ff::parse_source(source));
        ff::write_manifest(out, manifest.records);
        return manifest.records.size();
      },
      py::arg("image_dir"), py::arg("label"), py::arg("mask_dir"), py::arg("source"), py::arg("out"),
      "Scan a directory and write a JSON-lines manifest; returns the record count.");
  m.def(
      "read_manifest",
      [](const std::filesystem::path& p) {
        py::list out;
        for (const auto& r : ff::read_manifest(p)) out.append(record_to_dict(r));
        return out;
      },
      py::arg("path"));
  m.def(
      "split_manifest",
      [](const std::filesystem::path& p, double fraction, std::uint64_t seed) {
        const auto [train, val] = ff::split_manifest(ff::read_manifest(p), fraction, seed);
        py::list a, b;
        for (const auto& r : train) a.append(record_to_dict(r));
        for (const auto& r : val) b.append(record_to_dict(r));
        return py::make_tuple(a, b);
      },
      py::arg("path"), py::arg("train_fraction") = 0.8, py::arg("seed") = 0);

  // Models
  py::class_<ff::Detector>(m, "Detector")
      .def(py::init([](const std::string& spec_json, std::optional<std::uint64_t> seed) {
             if (seed) torch::manual_seed(*seed);
             ff::ModelSpec spec = ff::parse_model_section(nlohmann::json::parse(spec_json));
             spec.validate();
             return ff::Detector(spec);
           }),
           py::arg("spec_json") = "{}", py::arg("seed") = py::none())
      .def_static("load", [](const std::filesystem::path& p) { return std::move(ff::load_checkpoint(p).model); })
      .def("spec_json", [](const ff::Detector& d) { return ff::to_json(d.spec()).dump(); })
      .def(
          "forward",
          [](ff::Detector& d, const F32& images, std::optional<F32> masks) {
            torch::NoGradGuard no_grad;
            d.eval();
            std::optional<torch::Tensor> mt;
            if (masks) mt = to_tensor(*masks);
            const auto out = d.forward(to_tensor(images), mt);
            py::dict r;
            r["features"] = to_numpy(out.features);
            r["logits"] = to_numpy(out.logits);
            r["scores"] = to_numpy(out.scores);
            if (out.maps.defined()) r["maps"] = to_numpy(out.maps);
            return r;
          },
          py::arg("images"), py::arg("masks") = py::none(),
          "Eval-mode forward pass on a normalized Nx3xHxW float array.");
}
