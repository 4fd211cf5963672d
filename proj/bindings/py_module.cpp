#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <sstream>

#include "relocc/dataset.hpp"
#include "relocc/evaluation.hpp"
#include "relocc/geometry.hpp"
#include "relocc/image.hpp"
#include "relocc/inference.hpp"
#include "relocc/matching.hpp"
#include "relocc/model.hpp"
#include "relocc/scene.hpp"

namespace py = pybind11;
using namespace relocc;

namespace {

Image image_from_array(const py::array_t<uint8_t>& arr) {
  auto buf = arr.request();
  if (buf.ndim != 3 || buf.shape[2] != 3)
    throw std::invalid_argument("expected an (H, W, 3) uint8 array");
  Image img(int(buf.shape[1]), int(buf.shape[0]));
  auto view = arr.unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      uint8_t* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = view(y, x, c);
    }
  return img;
}

py::array_t<uint8_t> image_to_array(const Image& img) {
  py::array_t<uint8_t> arr({img.height, img.width, 3});
  std::memcpy(arr.mutable_data(), img.rgb.data(), img.rgb.size());
  return arr;
}

std::string box_repr(const Box& b) {
  std::ostringstream s;
  s << "Box(" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", "
    << b.y_max << ")";
  return s.str();
}

}  // namespace

PYBIND11_MODULE(_relocc, m) {
  m.doc() = "relative occlusion and distance detection core";

  py::class_<Box>(m, "Box")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("x0"),
           py::arg("y0"), py::arg("x1"), py::arg("y1"))
      .def_static("from_center", &Box::from_center)
      .def_readwrite("x_min", &Box::x_min)
      .def_readwrite("y_min", &Box::y_min)
      .def_readwrite("x_max", &Box::x_max)
      .def_readwrite("y_max", &Box::y_max)
      .def("to_center", &Box::to_center)
      .def("width", &Box::width)
      .def("height", &Box::height)
      .def("area", &Box::area)
      .def("__eq__", [](const Box& a, const Box& b) { return a == b; })
      .def("__repr__", &box_repr);

  m.def("iou", &iou);
  m.def("giou", &giou);
  m.def("intersects", &intersects);
  m.def("generalized_intersection_box", &generalized_intersection_box);
  m.def("positional_encoding", &positional_encoding, py::arg("h"), py::arg("w"),
        py::arg("d"));

  py::enum_<DistanceClass>(m, "DistanceClass")
      .value("a_closer", DistanceClass::a_closer)
      .value("b_closer", DistanceClass::b_closer)
      .value("same", DistanceClass::same)
      .value("not_sure", DistanceClass::not_sure);
  py::enum_<OcclusionClass>(m, "OcclusionClass")
      .value("a_occludes_b", OcclusionClass::a_occludes_b)
      .value("b_occludes_a", OcclusionClass::b_occludes_a)
      .value("none", OcclusionClass::none)
      .value("mutual", OcclusionClass::mutual);

  py::class_<PairAnnotation>(m, "PairAnnotation")
      .def(py::init<>())
      .def_readwrite("box_a", &PairAnnotation::box_a)
      .def_readwrite("box_b", &PairAnnotation::box_b)
      .def_readwrite("cat_a", &PairAnnotation::cat_a)
      .def_readwrite("cat_b", &PairAnnotation::cat_b)
      .def_readwrite("distance", &PairAnnotation::distance)
      .def_readwrite("occlusion", &PairAnnotation::occlusion);

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("width", &GenConfig::width)
      .def_readwrite("height", &GenConfig::height)
      .def_readwrite("min_objects", &GenConfig::min_objects)
      .def_readwrite("max_objects", &GenConfig::max_objects)
      .def_readwrite("num_categories", &GenConfig::num_categories)
      .def_readwrite("p_tangle", &GenConfig::p_tangle)
      .def_readwrite("p_same", &GenConfig::p_same)
      .def_readwrite("same_band", &GenConfig::same_band);

  py::class_<ImageRecord>(m, "ImageRecord")
      .def_readonly("image_id", &ImageRecord::image_id)
      .def_readonly("split", &ImageRecord::split)
      .def_readonly("pairs", &ImageRecord::pairs);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("width", &Dataset::width)
      .def_readonly("height", &Dataset::height)
      .def_readonly("num_categories", &Dataset::num_categories)
      .def_readonly("dir", &Dataset::dir)
      .def_readonly("records", &Dataset::records)
      .def("image_path", &Dataset::image_path)
      .def_static("annotated_object_count", &Dataset::annotated_object_count);

  m.def(
      "synthesize_dataset",
      [](uint64_t seed, const GenConfig& cfg, int train, int val, int test,
         const std::string& out_dir) {
        return synthesize_dataset(seed, cfg, {train, val, test}, out_dir);
      },
      py::arg("seed"), py::arg("config"), py::arg("train"), py::arg("val"),
      py::arg("test"), py::arg("out_dir"));
  m.def("load_dataset", &load_dataset);

  m.def("load_png", [](const std::string& path) {
    return image_to_array(load_png(path));
  });
  m.def("save_png", [](const py::array_t<uint8_t>& arr, const std::string& path) {
    save_png(image_from_array(arr), path);
  });

  m.def(
      "hungarian_match",
      [](const Mat& cost) {
        Assignment a = hungarian_match(cost);
        return py::make_tuple(a.query_for_target, a.total_cost);
      },
      py::arg("cost"),
      "Optimal target->query assignment; returns (indices, total_cost)");

  py::class_<PredictionSet>(m, "PredictionSet")
      .def_readonly("p_a", &PredictionSet::p_a)
      .def_readonly("p_b", &PredictionSet::p_b)
      .def_readonly("box_a", &PredictionSet::box_a)
      .def_readonly("box_b", &PredictionSet::box_b)
      .def_readonly("p_d", &PredictionSet::p_d)
      .def_readonly("p_o", &PredictionSet::p_o)
      .def_readonly("box_int", &PredictionSet::box_int);

  py::class_<PairPrediction>(m, "PairPrediction")
      .def_readonly("box_a", &PairPrediction::box_a)
      .def_readonly("box_b", &PairPrediction::box_b)
      .def_readonly("cat_a", &PairPrediction::cat_a)
      .def_readonly("cat_b", &PairPrediction::cat_b)
      .def_readonly("distance", &PairPrediction::distance)
      .def_readonly("occlusion", &PairPrediction::occlusion)
      .def_readonly("confidence", &PairPrediction::confidence)
      .def_readonly("query", &PairPrediction::query)
      .def_readonly("box_int", &PairPrediction::box_int)
      .def_readonly("has_int", &PairPrediction::has_int);

  m.def("materialize", &materialize);
  m.def("nms", &nms);
  m.def("select_for_eval", &select_for_eval, py::arg("preds"), py::arg("n"));

  py::class_<TaskCounts>(m, "TaskCounts")
      .def_readonly("tp", &TaskCounts::tp)
      .def_readonly("fp", &TaskCounts::fp)
      .def_readonly("gt", &TaskCounts::gt)
      .def("precision", &TaskCounts::precision)
      .def("recall", &TaskCounts::recall)
      .def("f1", &TaskCounts::f1);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("distance", &Metrics::distance)
      .def_readonly("occlusion", &Metrics::occlusion)
      .def_readonly("both", &Metrics::both);

  py::class_<ImagePredictions>(m, "ImagePredictions")
      .def(py::init([](const std::string& id, std::vector<PairPrediction> p) {
             return ImagePredictions{id, std::move(p)};
           }),
           py::arg("image_id"), py::arg("preds"))
      .def_readonly("image_id", &ImagePredictions::image_id)
      .def_readonly("preds", &ImagePredictions::preds);

  m.def("evaluate", &evaluate, py::arg("preds"), py::arg("gts"));
  m.def(
      "metrics_report",
      [](const Metrics& mt) { return metrics_report(mt); }, py::arg("metrics"));

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("image_h", &ModelConfig::image_h)
      .def_readwrite("image_w", &ModelConfig::image_w)
      .def_readwrite("hidden_dim", &ModelConfig::hidden_dim)
      .def_readwrite("backbone_channels", &ModelConfig::backbone_channels)
      .def_readwrite("encoder_layers", &ModelConfig::encoder_layers)
      .def_readwrite("num_heads", &ModelConfig::num_heads)
      .def_readwrite("num_queries", &ModelConfig::num_queries)
      .def_readwrite("pair_layers", &ModelConfig::pair_layers)
      .def_readwrite("distance_layers", &ModelConfig::distance_layers)
      .def_readwrite("occlusion_layers", &ModelConfig::occlusion_layers)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def_readwrite("ffn_hidden", &ModelConfig::ffn_hidden)
      .def_readwrite("dropout", &ModelConfig::dropout)
      .def_readwrite("git_enabled", &ModelConfig::git_enabled)
      .def_readwrite("pini_enabled", &ModelConfig::pini_enabled)
      .def_readwrite("single_decoder", &ModelConfig::single_decoder)
      .def("to_json", &ModelConfig::to_json)
      .def_static("from_json", &ModelConfig::from_json);

  py::class_<Model>(m, "Model")
      .def(py::init<const ModelConfig&, uint64_t>(), py::arg("config"),
           py::arg("init_seed"))
      .def_static("load", &Model::load)
      .def("save", &Model::save)
      .def("config", &Model::config)
      .def("token_grid", &Model::token_grid, py::arg("img_h"), py::arg("img_w"))
      .def(
          "predict",
          [](const Model& model, const py::array_t<uint8_t>& arr) {
            Image img = image_from_array(arr);
            return model.predict(image_to_tensor(img), img.height, img.width);
          },
          py::arg("image"), "Run inference on an (H, W, 3) uint8 image")
      .def(
          "predict_png",
          [](const Model& model, const std::string& path) {
            Image img = load_png(path);
            return model.predict(image_to_tensor(img), img.height, img.width);
          },
          py::arg("path"));
}
