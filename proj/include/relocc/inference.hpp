#pragma once

#include <string>
#include <vector>

#include "relocc/geometry.hpp"
#include "relocc/model.hpp"
#include "relocc/scene.hpp"

namespace relocc {

// One materialized query: argmax classes, corner-form boxes, confidence.
struct PairPrediction {
  Box box_a, box_b;
  int cat_a = 0, cat_b = 0;  // argmax over object columns incl. background
  DistanceClass distance = DistanceClass::not_sure;
  OcclusionClass occlusion = OcclusionClass::none;
  double confidence = 0.0;    // max(p_d) * max(p_o)
  double class_conf_a = 0.0;  // max(p_a), for the visualization ordering
  double class_conf_b = 0.0;
  int query = -1;
  Box box_int;
  bool has_int = false;

  bool operator==(const PairPrediction&) const = default;
};

struct ImagePredictions {
  std::string image_id;
  std::vector<PairPrediction> preds;
};

double confidence(const PredictionSet& p, int query);

std::vector<PairPrediction> materialize(const PredictionSet& p);

// Duplicates per the suppression rule: both box IoUs strictly above 0.7 and
// all four argmax labels equal.
bool is_duplicate(const PairPrediction& p1, const PairPrediction& p2);

// Greedy keep-highest pass over confidence-descending order (query index
// breaks ties). Output stays in that order and is pairwise non-duplicate.
std::vector<PairPrediction> nms(std::vector<PairPrediction> preds);

// Top min{n(n-1), |preds|} of an NMS-filtered list; n is the leaked object
// count. n < 1 rejected.
std::vector<PairPrediction> select_for_eval(const std::vector<PairPrediction>& preds,
                                            int n);

// Alternative ordering for visualization: confidence times both object-class
// confidences.
std::vector<PairPrediction> sorted_for_viz(std::vector<PairPrediction> preds);

// Prediction dump: header line then one record per image, same pair fields
// as the annotation file plus confidence and the intersection box when
// present.
void save_predictions(const std::vector<ImagePredictions>& preds, int width,
                      int height, int num_categories, const std::string& path);
std::vector<ImagePredictions> load_predictions(const std::string& path);

}  // namespace relocc
