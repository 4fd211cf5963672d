#pragma once

#include <array>
#include <string>
#include <vector>

#include "relocc/dataset.hpp"
#include "relocc/inference.hpp"

namespace relocc {

// Both box IoUs strictly above 0.5; categories are deliberately ignored.
bool is_correct_detection(const PairPrediction& p, const PairAnnotation& g);

// Correct detection plus both relationship argmaxes right.
bool is_correct_prediction(const PairPrediction& p, const PairAnnotation& g);

struct TaskCounts {
  long tp = 0;
  long fp = 0;
  long gt = 0;

  double precision() const { return tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0; }
  double recall() const { return gt > 0 ? double(tp) / double(gt) : 0.0; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
};

struct Metrics {
  TaskCounts distance;  // detection correct + distance predicate correct
  TaskCounts occlusion;
  TaskCounts both;  // joint diagnostic: both predicates right
  std::array<TaskCounts, 4> distance_by_class;
  std::array<TaskCounts, 4> occlusion_by_class;
};

// Confidence-descending greedy first-match accounting per image, each
// ground-truth pair consumable once, independently per task. Image id sets
// must coincide.
Metrics evaluate(const std::vector<ImagePredictions>& preds,
                 const std::vector<ImageRecord>& gts);

struct GoodDetectionCell {
  long support = 0;  // matched detections predicting this class
  long correct = 0;
  double precision() const { return support > 0 ? double(correct) / double(support) : 0.0; }
};

struct GoodDetectionTable {
  double iou_threshold = 0.6;
  std::array<GoodDetectionCell, 4> distance;
  std::array<GoodDetectionCell, 4> occlusion;
};

// Predicate precision over detections matched at a stricter IoU threshold.
GoodDetectionTable good_detection_precision(const std::vector<ImagePredictions>& preds,
                                            const std::vector<ImageRecord>& gts,
                                            double iou_threshold = 0.6);

// Structured report of everything above, as a JSON document.
std::string metrics_report(const Metrics& m, const GoodDetectionTable* table = nullptr);

}  // namespace relocc
