#include "relocc/evaluation.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "relocc/rng.hpp"

using namespace relocc;

namespace {

PairAnnotation make_gt(const Box& a, const Box& b, DistanceClass d,
                       OcclusionClass o, int ca = 0, int cb = 0) {
  PairAnnotation g;
  g.box_a = a;
  g.box_b = b;
  g.cat_a = ca;
  g.cat_b = cb;
  g.distance = d;
  g.occlusion = o;
  return g;
}

PairPrediction pred_from_gt(const PairAnnotation& g, double conf, int query) {
  PairPrediction p;
  p.box_a = g.box_a;
  p.box_b = g.box_b;
  p.cat_a = g.cat_a;
  p.cat_b = g.cat_b;
  p.distance = g.distance;
  p.occlusion = g.occlusion;
  p.confidence = conf;
  p.query = query;
  return p;
}

ImageRecord make_record(const std::string& id,
                        std::vector<PairAnnotation> pairs) {
  ImageRecord r;
  r.image_id = id;
  r.split = "test";
  r.pairs = std::move(pairs);
  return r;
}

}  // namespace

TEST_CASE("detection correctness needs both IoUs above 0.5 and ignores categories") {
  auto g = make_gt(Box(0, 0, 1, 1), Box(0, 0, 1, 1), DistanceClass::same,
                   OcclusionClass::none, 2, 3);
  auto exact = pred_from_gt(g, 1.0, 0);
  CHECK(is_correct_detection(exact, g));

  auto wrong_cats = exact;
  wrong_cats.cat_a = 0;
  wrong_cats.cat_b = 1;
  CHECK(is_correct_detection(wrong_cats, g));
  CHECK(is_correct_prediction(wrong_cats, g));

  // Nested boxes give IoU equal to the height fraction exactly.
  auto close_call = exact;
  close_call.box_a = Box(0, 0, 1, 0.51);
  close_call.box_b = Box(0, 0, 1, 0.49);
  CHECK(!is_correct_detection(close_call, g));
  close_call.box_b = Box(0, 0, 1, 0.51);
  CHECK(is_correct_detection(close_call, g));
  close_call.box_b = Box(0, 0, 1, 0.5);
  CHECK(!is_correct_detection(close_call, g));  // strict threshold
}

TEST_CASE("prediction correctness is detection plus both predicates") {
  auto g = make_gt(Box(0.1, 0.1, 0.5, 0.5), Box(0.4, 0.2, 0.9, 0.7),
                   DistanceClass::a_closer, OcclusionClass::a_occludes_b);
  auto p = pred_from_gt(g, 1.0, 0);
  CHECK(is_correct_prediction(p, g));

  auto wrong_d = p;
  wrong_d.distance = DistanceClass::b_closer;  // ordered labels are distinct
  CHECK(!is_correct_prediction(wrong_d, g));
  auto wrong_o = p;
  wrong_o.occlusion = OcclusionClass::none;
  CHECK(!is_correct_prediction(wrong_o, g));
  auto off_box = p;
  off_box.box_a = Box(0.6, 0.6, 0.9, 0.9);
  CHECK(!is_correct_prediction(off_box, g));
}

TEST_CASE("perfect predictions score ones across the board") {
  std::vector<ImageRecord> gts;
  std::vector<ImagePredictions> preds;
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> U(0.0, 0.45);
  for (int i = 0; i < 4; ++i) {
    std::vector<PairAnnotation> pairs;
    for (int k = 0; k < 2; ++k) {
      double x = U(rng), y = U(rng);
      pairs.push_back(make_gt(Box(x, y, x + 0.3, y + 0.3),
                              Box(x + 0.2, y + 0.1, x + 0.5, y + 0.4),
                              DistanceClass(k), OcclusionClass((i + k) % 4)));
    }
    std::string id = "img_" + std::to_string(i);
    gts.push_back(make_record(id, pairs));
    ImagePredictions ip{id, {}};
    for (std::size_t k = 0; k < pairs.size(); ++k)
      ip.preds.push_back(pred_from_gt(pairs[k], 0.9 - 0.1 * double(k), int(k)));
    preds.push_back(ip);
  }
  Metrics m = evaluate(preds, gts);
  for (const TaskCounts* c : {&m.distance, &m.occlusion, &m.both}) {
    CHECK(c->precision() == doctest::Approx(1.0));
    CHECK(c->recall() == doctest::Approx(1.0));
    CHECK(c->f1() == doctest::Approx(1.0));
  }
  CHECK(m.distance.gt == 8);
  CHECK(m.distance.tp == 8);
  CHECK(m.distance.fp == 0);
}

TEST_CASE("a ground-truth pair is consumable once: second correct hit is a false positive") {
  auto g = make_gt(Box(0.1, 0.1, 0.5, 0.5), Box(0.4, 0.2, 0.9, 0.7),
                   DistanceClass::a_closer, OcclusionClass::none);
  std::vector<ImageRecord> gts{make_record("img", {g})};
  std::vector<ImagePredictions> preds{
      {"img", {pred_from_gt(g, 0.9, 0), pred_from_gt(g, 0.8, 1)}}};
  Metrics m = evaluate(preds, gts);
  CHECK(m.occlusion.tp == 1);
  CHECK(m.occlusion.fp == 1);
  CHECK(m.distance.tp == 1);
  CHECK(m.distance.fp == 1);
}

TEST_CASE("hand fixture: four predictions against three ground-truth pairs") {
  // Three well-separated ground-truth pairs.
  auto g0 = make_gt(Box(0.05, 0.05, 0.25, 0.25), Box(0.15, 0.1, 0.35, 0.3),
                    DistanceClass::a_closer, OcclusionClass::a_occludes_b);
  auto g1 = make_gt(Box(0.55, 0.05, 0.75, 0.25), Box(0.65, 0.1, 0.85, 0.3),
                    DistanceClass::b_closer, OcclusionClass::none);
  auto g2 = make_gt(Box(0.05, 0.55, 0.25, 0.75), Box(0.15, 0.6, 0.35, 0.8),
                    DistanceClass::same, OcclusionClass::mutual);
  std::vector<ImageRecord> gts{make_record("img", {g0, g1, g2})};

  auto p0 = pred_from_gt(g0, 0.9, 0);  // fully correct
  auto p1 = pred_from_gt(g1, 0.8, 1);  // fully correct
  auto p2 = pred_from_gt(g2, 0.7, 2);  // right boxes and distance, wrong occlusion
  p2.occlusion = OcclusionClass::none;
  auto p3 = pred_from_gt(g0, 0.6, 3);  // boxes nowhere near anything
  p3.box_a = Box(0.6, 0.6, 0.9, 0.9);
  p3.box_b = Box(0.7, 0.7, 0.95, 0.95);
  std::vector<ImagePredictions> preds{{"img", {p0, p1, p2, p3}}};

  Metrics m = evaluate(preds, gts);
  CHECK(m.occlusion.tp == 2);
  CHECK(m.occlusion.fp == 2);
  CHECK(m.occlusion.precision() == doctest::Approx(0.5));
  CHECK(m.occlusion.recall() == doctest::Approx(2.0 / 3.0));
  CHECK(m.occlusion.f1() == doctest::Approx(0.5714).epsilon(1e-3));

  CHECK(m.distance.tp == 3);
  CHECK(m.distance.fp == 1);
  CHECK(m.distance.precision() == doctest::Approx(0.75));
  CHECK(m.distance.recall() == doctest::Approx(1.0));
  CHECK(m.distance.f1() == doctest::Approx(6.0 / 7.0));

  CHECK(m.both.tp == 2);
  CHECK(m.both.fp == 2);

  // Per-class spot checks: the mutual ground truth went unmatched, and the
  // wrong-occlusion prediction landed as a "none" false positive.
  const auto& none_cell = m.occlusion_by_class[std::size_t(int(OcclusionClass::none))];
  CHECK(none_cell.tp == 1);
  CHECK(none_cell.fp == 1);
  const auto& mutual_cell =
      m.occlusion_by_class[std::size_t(int(OcclusionClass::mutual))];
  CHECK(mutual_cell.tp == 0);
  CHECK(mutual_cell.gt == 1);
  CHECK(mutual_cell.f1() == 0.0);

  long tp_sum = 0, fp_sum = 0, gt_sum = 0;
  for (const auto& c : m.occlusion_by_class) {
    tp_sum += c.tp;
    fp_sum += c.fp;
    gt_sum += c.gt;
  }
  CHECK(tp_sum == m.occlusion.tp);
  CHECK(fp_sum == m.occlusion.fp);
  CHECK(gt_sum == m.occlusion.gt);
}

TEST_CASE("metrics ignore the order predictions arrive in") {
  auto rng = make_rng(99);
  std::uniform_real_distribution<double> U(0.0, 0.4);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<ImageRecord> gts;
  std::vector<ImagePredictions> preds;
  for (int i = 0; i < 6; ++i) {
    std::vector<PairAnnotation> pairs;
    for (int k = 0; k < 3; ++k) {
      double x = U(rng), y = U(rng);
      pairs.push_back(make_gt(Box(x, y, x + 0.35, y + 0.35),
                              Box(x + 0.15, y + 0.1, x + 0.5, y + 0.45),
                              DistanceClass(cls(rng)), OcclusionClass(cls(rng))));
    }
    std::string id = "img_" + std::to_string(i);
    gts.push_back(make_record(id, pairs));
    ImagePredictions ip{id, {}};
    for (int k = 0; k < 5; ++k) {
      auto p = pred_from_gt(pairs[std::size_t(k % 3)], 0.1 + 0.17 * k, k);
      if (k >= 3) p.distance = DistanceClass(cls(rng));
      if (cls(rng) == 0) p.occlusion = OcclusionClass(cls(rng));
      ip.preds.push_back(p);
    }
    preds.push_back(ip);
  }
  Metrics base = evaluate(preds, gts);
  auto shuffled = preds;
  for (auto& ip : shuffled)
    std::shuffle(ip.preds.begin(), ip.preds.end(), rng);
  std::reverse(shuffled.begin(), shuffled.end());
  Metrics again = evaluate(shuffled, gts);
  CHECK(again.distance.tp == base.distance.tp);
  CHECK(again.distance.fp == base.distance.fp);
  CHECK(again.occlusion.tp == base.occlusion.tp);
  CHECK(again.occlusion.fp == base.occlusion.fp);
  CHECK(again.both.tp == base.both.tp);
  for (int c = 0; c < 4; ++c) {
    CHECK(again.distance_by_class[std::size_t(c)].tp ==
          base.distance_by_class[std::size_t(c)].tp);
    CHECK(again.occlusion_by_class[std::size_t(c)].fp ==
          base.occlusion_by_class[std::size_t(c)].fp);
  }
}

TEST_CASE("mismatched image id sets are rejected") {
  auto g = make_gt(Box(0.1, 0.1, 0.5, 0.5), Box(0.4, 0.2, 0.9, 0.7),
                   DistanceClass::a_closer, OcclusionClass::none);
  std::vector<ImageRecord> gts{make_record("a", {g}), make_record("b", {g})};
  std::vector<ImagePredictions> wrong_id{{"a", {}}, {"c", {}}};
  CHECK_THROWS_AS(evaluate(wrong_id, gts), std::invalid_argument);
  std::vector<ImagePredictions> missing{{"a", {}}};
  CHECK_THROWS_AS(evaluate(missing, gts), std::invalid_argument);
  std::vector<ImageRecord> dup{make_record("a", {g}), make_record("a", {g})};
  std::vector<ImagePredictions> two{{"a", {}}, {"a", {}}};
  CHECK_THROWS_AS(evaluate(two, dup), std::invalid_argument);
}

TEST_CASE("good detection table: matched detections grade their predicates") {
  auto g0 = make_gt(Box(0.05, 0.05, 0.25, 0.25), Box(0.15, 0.1, 0.35, 0.3),
                    DistanceClass::a_closer, OcclusionClass::a_occludes_b);
  auto g1 = make_gt(Box(0.55, 0.05, 0.75, 0.25), Box(0.65, 0.1, 0.85, 0.3),
                    DistanceClass::b_closer, OcclusionClass::none);
  std::vector<ImageRecord> gts{make_record("img", {g0, g1})};

  auto p0 = pred_from_gt(g0, 0.9, 0);  // right boxes, right predicates
  auto p1 = pred_from_gt(g1, 0.8, 1);  // right boxes, wrong distance
  p1.distance = DistanceClass::a_closer;
  auto p2 = pred_from_gt(g0, 0.7, 2);  // bad boxes: never matched
  p2.box_a = Box(0.5, 0.6, 0.8, 0.9);
  p2.box_b = Box(0.6, 0.7, 0.9, 0.95);
  std::vector<ImagePredictions> preds{{"img", {p0, p1, p2}}};

  auto t = good_detection_precision(preds, gts, 0.6);
  const auto& a_closer = t.distance[std::size_t(int(DistanceClass::a_closer))];
  CHECK(a_closer.support == 2);
  CHECK(a_closer.correct == 1);
  CHECK(a_closer.precision() == doctest::Approx(0.5));
  const auto& b_closer = t.distance[std::size_t(int(DistanceClass::b_closer))];
  CHECK(b_closer.support == 0);
  CHECK(b_closer.precision() == 0.0);
  const auto& occ = t.occlusion[std::size_t(int(OcclusionClass::a_occludes_b))];
  CHECK(occ.support == 1);
  CHECK(occ.correct == 1);

  // Zero threshold admits every overlapping detection.
  auto loose = good_detection_precision(preds, gts, 0.0);
  long support = 0;
  for (const auto& c : loose.distance) support += c.support;
  CHECK(support == 2);  // p2 overlaps nothing it can match

  // Impossible threshold leaves an all-zero-support table.
  auto strict = good_detection_precision(preds, gts, 1.0);
  for (const auto& c : strict.distance) CHECK(c.support == 0);
}

TEST_CASE("metrics report serializes every block") {
  auto g = make_gt(Box(0.1, 0.1, 0.5, 0.5), Box(0.4, 0.2, 0.9, 0.7),
                   DistanceClass::a_closer, OcclusionClass::none);
  std::vector<ImageRecord> gts{make_record("img", {g})};
  std::vector<ImagePredictions> preds{{"img", {pred_from_gt(g, 0.9, 0)}}};
  Metrics m = evaluate(preds, gts);
  auto table = good_detection_precision(preds, gts);
  auto text = metrics_report(m, &table);
  auto j = nlohmann::json::parse(text);
  CHECK(j.at("distance").at("f1").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("occlusion").at("tp").get<long>() == 1);
  CHECK(j.at("both_predicates").at("precision").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("distance_by_class").contains("a_closer"));
  CHECK(j.at("good_detection").at("iou_threshold").get<double>() == doctest::Approx(0.6));
  CHECK(j.at("good_detection").at("occlusion").at("mutual").at("precision").is_null());
}
