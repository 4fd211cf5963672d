#include "relocc/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <stdexcept>

namespace relocc {

using nlohmann::json;

namespace {

std::vector<PairPrediction> by_confidence(std::vector<PairPrediction> preds) {
  std::stable_sort(preds.begin(), preds.end(),
                   [](const PairPrediction& a, const PairPrediction& b) {
                     if (a.confidence != b.confidence)
                       return a.confidence > b.confidence;
                     return a.query < b.query;
                   });
  return preds;
}

// Greedy first-match pass for one image under a per-pair correctness test.
// Returns the matched ground-truth index per prediction, -1 for false
// positives.
template <typename CorrectFn>
std::vector<int> greedy_match(const std::vector<PairPrediction>& preds,
                              const std::vector<PairAnnotation>& gts,
                              CorrectFn correct) {
  std::vector<int> matched_gt(preds.size(), -1);
  std::vector<char> used(gts.size(), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      if (correct(preds[i], gts[g])) {
        used[g] = 1;
        matched_gt[i] = int(g);
        break;
      }
    }
  }
  return matched_gt;
}

const std::vector<PairAnnotation>& gt_for(
    const std::map<std::string, const ImageRecord*>& by_id, const std::string& id) {
  return by_id.at(id)->pairs;
}

std::map<std::string, const ImageRecord*> index_gts(
    const std::vector<ImagePredictions>& preds, const std::vector<ImageRecord>& gts) {
  std::map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& r : gts) {
    if (!by_id.emplace(r.image_id, &r).second)
      throw std::invalid_argument("duplicate ground-truth image id " + r.image_id);
  }
  if (preds.size() != gts.size())
    throw std::invalid_argument("prediction and ground-truth image sets differ");
  for (const ImagePredictions& ip : preds) {
    if (!by_id.count(ip.image_id))
      throw std::invalid_argument("prediction for unknown image id " + ip.image_id);
  }
  return by_id;
}

json counts_json(const TaskCounts& c) {
  return json{{"tp", c.tp},           {"fp", c.fp},
              {"gt", c.gt},           {"precision", c.precision()},
              {"recall", c.recall()}, {"f1", c.f1()}};
}

}  // namespace

bool is_correct_detection(const PairPrediction& p, const PairAnnotation& g) {
  return iou(p.box_a, g.box_a) > 0.5 && iou(p.box_b, g.box_b) > 0.5;
}

bool is_correct_prediction(const PairPrediction& p, const PairAnnotation& g) {
  return is_correct_detection(p, g) && p.distance == g.distance &&
         p.occlusion == g.occlusion;
}

Metrics evaluate(const std::vector<ImagePredictions>& preds,
                 const std::vector<ImageRecord>& gts) {
  auto by_id = index_gts(preds, gts);
  Metrics m;

  auto run_task = [&](TaskCounts& overall, std::array<TaskCounts, 4>* by_class,
                      auto correct, auto pred_class, auto gt_class) {
    for (const ImagePredictions& ip : preds) {
      const auto& gt = gt_for(by_id, ip.image_id);
      auto ordered = by_confidence(ip.preds);
      auto matched = greedy_match(ordered, gt, correct);
      overall.gt += long(gt.size());
      if (by_class) {
        for (const PairAnnotation& g : gt)
          (*by_class)[std::size_t(gt_class(g))].gt += 1;
      }
      for (std::size_t i = 0; i < ordered.size(); ++i) {
        const bool hit = matched[i] >= 0;
        overall.tp += hit;
        overall.fp += !hit;
        if (by_class) {
          auto& cell = (*by_class)[std::size_t(pred_class(ordered[i]))];
          cell.tp += hit;
          cell.fp += !hit;
        }
      }
    }
  };

  run_task(
      m.distance, &m.distance_by_class,
      [](const PairPrediction& p, const PairAnnotation& g) {
        return is_correct_detection(p, g) && p.distance == g.distance;
      },
      [](const PairPrediction& p) { return int(p.distance); },
      [](const PairAnnotation& g) { return int(g.distance); });
  run_task(
      m.occlusion, &m.occlusion_by_class,
      [](const PairPrediction& p, const PairAnnotation& g) {
        return is_correct_detection(p, g) && p.occlusion == g.occlusion;
      },
      [](const PairPrediction& p) { return int(p.occlusion); },
      [](const PairAnnotation& g) { return int(g.occlusion); });
  run_task(
      m.both, nullptr, is_correct_prediction,
      [](const PairPrediction&) { return 0; }, [](const PairAnnotation&) { return 0; });
  return m;
}

GoodDetectionTable good_detection_precision(const std::vector<ImagePredictions>& preds,
                                            const std::vector<ImageRecord>& gts,
                                            double iou_threshold) {
  auto by_id = index_gts(preds, gts);
  GoodDetectionTable t;
  t.iou_threshold = iou_threshold;
  for (const ImagePredictions& ip : preds) {
    const auto& gt = gt_for(by_id, ip.image_id);
    auto ordered = by_confidence(ip.preds);
    auto matched = greedy_match(
        ordered, gt, [&](const PairPrediction& p, const PairAnnotation& g) {
          return iou(p.box_a, g.box_a) > iou_threshold &&
                 iou(p.box_b, g.box_b) > iou_threshold;
        });
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (matched[i] < 0) continue;
      const PairAnnotation& g = gt[std::size_t(matched[i])];
      auto& d = t.distance[std::size_t(int(ordered[i].distance))];
      d.support += 1;
      d.correct += ordered[i].distance == g.distance;
      auto& o = t.occlusion[std::size_t(int(ordered[i].occlusion))];
      o.support += 1;
      o.correct += ordered[i].occlusion == g.occlusion;
    }
  }
  return t;
}

std::string metrics_report(const Metrics& m, const GoodDetectionTable* table) {
  json j{{"distance", counts_json(m.distance)},
         {"occlusion", counts_json(m.occlusion)},
         {"both_predicates", counts_json(m.both)}};
  json dist_cls = json::object(), occl_cls = json::object();
  for (int c = 0; c < 4; ++c) {
    dist_cls[to_string(DistanceClass(c))] = counts_json(m.distance_by_class[std::size_t(c)]);
    occl_cls[to_string(OcclusionClass(c))] = counts_json(m.occlusion_by_class[std::size_t(c)]);
  }
  j["distance_by_class"] = std::move(dist_cls);
  j["occlusion_by_class"] = std::move(occl_cls);
  if (table) {
    json good{{"iou_threshold", table->iou_threshold}};
    json gd = json::object(), go = json::object();
    for (int c = 0; c < 4; ++c) {
      const auto& d = table->distance[std::size_t(c)];
      const auto& o = table->occlusion[std::size_t(c)];
      gd[to_string(DistanceClass(c))] =
          d.support > 0
              ? json{{"support", d.support}, {"precision", d.precision()}}
              : json{{"support", 0}, {"precision", nullptr}};
      go[to_string(OcclusionClass(c))] =
          o.support > 0
              ? json{{"support", o.support}, {"precision", o.precision()}}
              : json{{"support", 0}, {"precision", nullptr}};
    }
    good["distance"] = std::move(gd);
    good["occlusion"] = std::move(go);
    j["good_detection"] = std::move(good);
  }
  return j.dump(2);
}

}  // namespace relocc
