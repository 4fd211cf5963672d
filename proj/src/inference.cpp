#include "relocc/inference.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace relocc {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

int row_argmax(const Mat& m, int row, double* best = nullptr) {
  int idx = 0;
  double v = m(row, 0);
  for (int c = 1; c < m.cols(); ++c) {
    if (m(row, c) > v) {
      v = m(row, c);
      idx = c;
    }
  }
  if (best) *best = v;
  return idx;
}

Box row_box(const Mat& m, int row) {
  return Box::from_center(m(row, 0), m(row, 1), m(row, 2), m(row, 3));
}

json box_to_json(const Box& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw std::invalid_argument("box must be a quadruple");
  return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>());
}

bool conf_before(const PairPrediction& a, const PairPrediction& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return a.query < b.query;
}

}  // namespace

double confidence(const PredictionSet& p, int query) {
  return p.p_d.row(query).maxCoeff() * p.p_o.row(query).maxCoeff();
}

std::vector<PairPrediction> materialize(const PredictionSet& p) {
  const int n_q = int(p.p_a.rows());
  std::vector<PairPrediction> out{std::size_t(n_q)};
  for (int q = 0; q < n_q; ++q) {
    PairPrediction& r = out[std::size_t(q)];
    r.query = q;
    r.box_a = row_box(p.box_a, q);
    r.box_b = row_box(p.box_b, q);
    double da = 0, db = 0, dd = 0, do_ = 0;
    r.cat_a = row_argmax(p.p_a, q, &da);
    r.cat_b = row_argmax(p.p_b, q, &db);
    r.distance = DistanceClass(row_argmax(p.p_d, q, &dd));
    r.occlusion = OcclusionClass(row_argmax(p.p_o, q, &do_));
    r.class_conf_a = da;
    r.class_conf_b = db;
    r.confidence = dd * do_;
    if (p.box_int.size() > 0) {
      r.box_int = row_box(p.box_int, q);
      r.has_int = true;
    }
  }
  return out;
}

bool is_duplicate(const PairPrediction& p1, const PairPrediction& p2) {
  return iou(p1.box_a, p2.box_a) > 0.7 && iou(p1.box_b, p2.box_b) > 0.7 &&
         p1.cat_a == p2.cat_a && p1.cat_b == p2.cat_b &&
         p1.distance == p2.distance && p1.occlusion == p2.occlusion;
}

std::vector<PairPrediction> nms(std::vector<PairPrediction> preds) {
  std::sort(preds.begin(), preds.end(), conf_before);
  std::vector<PairPrediction> kept;
  for (const PairPrediction& p : preds) {
    bool dup = std::any_of(kept.begin(), kept.end(),
                           [&](const PairPrediction& k) { return is_duplicate(k, p); });
    if (!dup) kept.push_back(p);
  }
  return kept;
}

std::vector<PairPrediction> select_for_eval(const std::vector<PairPrediction>& preds,
                                            int n) {
  if (n < 1) throw std::invalid_argument("select_for_eval: n must be >= 1");
  const std::size_t want =
      std::min(preds.size(), std::size_t(n) * std::size_t(n - 1));
  return {preds.begin(), preds.begin() + long(want)};
}

std::vector<PairPrediction> sorted_for_viz(std::vector<PairPrediction> preds) {
  std::stable_sort(preds.begin(), preds.end(),
                   [](const PairPrediction& a, const PairPrediction& b) {
                     double ka = a.confidence * a.class_conf_a * a.class_conf_b;
                     double kb = b.confidence * b.class_conf_a * b.class_conf_b;
                     if (ka != kb) return ka > kb;
                     return a.query < b.query;
                   });
  return preds;
}

void save_predictions(const std::vector<ImagePredictions>& preds, int width,
                      int height, int num_categories, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << json{{"schema_version", kSchemaVersion},
              {"kind", "relocc-predictions"},
              {"width", width},
              {"height", height},
              {"num_categories", num_categories}}
             .dump()
      << '\n';
  for (const ImagePredictions& ip : preds) {
    json pairs = json::array();
    for (const PairPrediction& p : ip.preds) {
      json j{{"box_a", box_to_json(p.box_a)},
             {"box_b", box_to_json(p.box_b)},
             {"cat_a", p.cat_a},
             {"cat_b", p.cat_b},
             {"distance", to_string(p.distance)},
             {"occlusion", to_string(p.occlusion)},
             {"confidence", p.confidence},
             {"class_conf_a", p.class_conf_a},
             {"class_conf_b", p.class_conf_b},
             {"query", p.query}};
      if (p.has_int) j["box_int"] = box_to_json(p.box_int);
      pairs.push_back(std::move(j));
    }
    out << json{{"image_id", ip.image_id}, {"pairs", std::move(pairs)}}.dump()
        << '\n';
  }
}

std::vector<ImagePredictions> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line)) fail("missing header");
  line_no = 1;
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("kind", "") != "relocc-predictions" ||
      header.value("schema_version", -1) != kSchemaVersion)
    fail("not a prediction file");
  std::vector<ImagePredictions> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail("malformed record");
    ImagePredictions ip;
    ip.image_id = j.at("image_id").get<std::string>();
    for (const json& pj : j.at("pairs")) {
      PairPrediction p;
      p.box_a = box_from_json(pj.at("box_a"));
      p.box_b = box_from_json(pj.at("box_b"));
      p.cat_a = pj.at("cat_a").get<int>();
      p.cat_b = pj.at("cat_b").get<int>();
      p.distance = distance_from_string(pj.at("distance").get<std::string>());
      p.occlusion = occlusion_from_string(pj.at("occlusion").get<std::string>());
      p.confidence = pj.at("confidence").get<double>();
      p.class_conf_a = pj.value("class_conf_a", 0.0);
      p.class_conf_b = pj.value("class_conf_b", 0.0);
      p.query = pj.value("query", -1);
      if (pj.contains("box_int")) {
        p.box_int = box_from_json(pj.at("box_int"));
        p.has_int = true;
      }
      ip.preds.push_back(p);
    }
    out.push_back(std::move(ip));
  }
  return out;
}

}  // namespace relocc
