#pragma once

#include <vector>

#include "relocc/model.hpp"
#include "relocc/scene.hpp"

namespace relocc {

struct MatchWeights {
  double beta_c = 1.2;
  double beta_r = 1.0;
  double alpha_a = 1.0;
  double alpha_b = 1.0;
  double alpha_d = 2.0;
  double alpha_o = 2.0;
  double alpha_l1 = 5.0;
  double alpha_giou = 2.0;
  double alpha_eos = 0.02;
};

struct Assignment {
  std::vector<int> query_for_target;  // injective, one query per target
  double total_cost = 0.0;
};

// Normalized weighted sum of (1 - p[gt]) over the four classification heads.
double classification_cost(const PairAnnotation& g, const PredictionSet& p, int query,
                           const MatchWeights& w);

// Mean per-box L1+GIoU cost over {A, B} plus the generalized intersection box
// when it participates (git enabled, and under PINI only for literally
// intersecting ground-truth boxes).
double regression_cost(const PairAnnotation& g, const PredictionSet& p, int query,
                       const MatchWeights& w, bool git_enabled, bool pini_enabled);

double pair_cost(const PairAnnotation& g, const PredictionSet& p, int query,
                 const MatchWeights& w, bool git_enabled, bool pini_enabled);

Mat build_cost_matrix(const std::vector<PairAnnotation>& targets,
                      const PredictionSet& p, const MatchWeights& w,
                      bool git_enabled, bool pini_enabled);

// Optimal injective assignment of rows (targets) to columns (queries).
// Equal-cost optima resolve toward lower query indices.
Assignment hungarian_match(const Mat& cost);

Assignment hungarian_match(const std::vector<PairAnnotation>& targets,
                           const PredictionSet& p, const MatchWeights& w,
                           bool git_enabled, bool pini_enabled);

}  // namespace relocc
