#include "relocc/loss.hpp"

#include <stdexcept>

#include "relocc/geometry.hpp"

namespace relocc {

std::vector<MatchedPair> to_matched(const std::vector<PairAnnotation>& targets,
                                    const Assignment& a) {
  if (targets.size() != a.query_for_target.size())
    throw std::invalid_argument("to_matched: assignment size mismatch");
  std::vector<MatchedPair> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    out[i] = {targets[i], a.query_for_target[i]};
  return out;
}

Var classification_loss(Tape& t, const PredictionVars& p,
                        const std::vector<MatchedPair>& matched,
                        const MatchWeights& w) {
  const int n_q = int(p.p_a.val().rows());
  const int bg = int(p.p_a.val().cols()) - 1;
  std::vector<char> is_matched(std::size_t(n_q), 0);
  std::vector<ops::PickedEntry> pa, pb, pd, po;
  for (const MatchedPair& m : matched) {
    if (m.query < 0 || m.query >= n_q)
      throw std::invalid_argument("classification_loss: query out of range");
    is_matched[std::size_t(m.query)] = 1;
    pa.push_back({m.query, m.target.cat_a, w.alpha_a});
    pb.push_back({m.query, m.target.cat_b, w.alpha_b});
    pd.push_back({m.query, int(m.target.distance), w.alpha_d});
    po.push_back({m.query, int(m.target.occlusion), w.alpha_o});
  }
  for (int q = 0; q < n_q; ++q) {
    if (is_matched[std::size_t(q)]) continue;
    pa.push_back({q, bg, w.alpha_eos});
    pb.push_back({q, bg, w.alpha_eos});
  }
  std::vector<Var> terms;
  if (!pa.empty()) terms.push_back(ops::neg_log_picked(p.p_a, pa));
  if (!pb.empty()) terms.push_back(ops::neg_log_picked(p.p_b, pb));
  if (!pd.empty()) terms.push_back(ops::neg_log_picked(p.p_d, pd));
  if (!po.empty()) terms.push_back(ops::neg_log_picked(p.p_o, po));
  if (terms.empty()) return t.leaf(Mat::Zero(1, 1));
  return ops::weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

Var regression_loss(Tape& t, const PredictionVars& p,
                    const std::vector<MatchedPair>& matched,
                    const MatchWeights& w, bool git_enabled, bool pini_enabled) {
  const int n_q = int(p.box_a.val().rows());
  const bool has_int = git_enabled && p.box_int.tape != nullptr;
  Mat ta = Mat::Zero(n_q, 4), tb = Mat::Zero(n_q, 4), ti = Mat::Zero(n_q, 4);
  std::vector<double> wa(std::size_t(n_q), 0.0), wb = wa, wi = wa;
  auto put = [](Mat& m, int q, const Box& b) {
    auto c = b.to_center();
    for (int k = 0; k < 4; ++k) m(q, k) = c[std::size_t(k)];
  };
  bool any = false, any_int = false;
  for (const MatchedPair& m : matched) {
    if (m.query < 0 || m.query >= n_q)
      throw std::invalid_argument("regression_loss: query out of range");
    any = true;
    put(ta, m.query, m.target.box_a);
    put(tb, m.query, m.target.box_b);
    wa[std::size_t(m.query)] = 1.0;
    wb[std::size_t(m.query)] = 1.0;
    if (has_int && (!pini_enabled || intersects(m.target.box_a, m.target.box_b))) {
      put(ti, m.query, generalized_intersection_box(m.target.box_a, m.target.box_b));
      wi[std::size_t(m.query)] = 1.0;
      any_int = true;
    }
  }
  if (!any) return t.leaf(Mat::Zero(1, 1));
  auto scaled = [](std::vector<double> v, double s) {
    for (double& x : v) x *= s;
    return v;
  };
  std::vector<Var> terms{ops::l1_rows(p.box_a, ta, scaled(wa, w.alpha_l1)),
                         ops::giou_loss_rows(p.box_a, ta, scaled(wa, w.alpha_giou)),
                         ops::l1_rows(p.box_b, tb, scaled(wb, w.alpha_l1)),
                         ops::giou_loss_rows(p.box_b, tb, scaled(wb, w.alpha_giou))};
  if (any_int) {
    terms.push_back(ops::l1_rows(p.box_int, ti, scaled(wi, w.alpha_l1)));
    terms.push_back(ops::giou_loss_rows(p.box_int, ti, scaled(wi, w.alpha_giou)));
  }
  return ops::weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

Var total_loss(Tape& t, const PredictionVars& p,
               const std::vector<MatchedPair>& matched, const MatchWeights& w,
               bool git_enabled, bool pini_enabled) {
  Var c = classification_loss(t, p, matched, w);
  Var r = regression_loss(t, p, matched, w, git_enabled, pini_enabled);
  return ops::weighted_sum({c, r}, {w.beta_c, w.beta_r});
}

}  // namespace relocc
