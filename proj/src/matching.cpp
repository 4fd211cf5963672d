#include "relocc/matching.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "relocc/geometry.hpp"

namespace relocc {

namespace {

double box_term(const Box& target, const Mat& rows, int q, const MatchWeights& w) {
  auto c = target.to_center();
  double l1 = 0.0;
  for (int k = 0; k < 4; ++k) l1 += std::abs(rows(q, k) - c[std::size_t(k)]);
  Box pred = Box::from_center(rows(q, 0), rows(q, 1), rows(q, 2), rows(q, 3));
  return w.alpha_l1 * l1 + w.alpha_giou * (1.0 - giou(target, pred));
}

}  // namespace

double classification_cost(const PairAnnotation& g, const PredictionSet& p, int query,
                           const MatchWeights& w) {
  double num = w.alpha_a * (1.0 - p.p_a(query, g.cat_a)) +
               w.alpha_b * (1.0 - p.p_b(query, g.cat_b)) +
               w.alpha_d * (1.0 - p.p_d(query, int(g.distance))) +
               w.alpha_o * (1.0 - p.p_o(query, int(g.occlusion)));
  return num / (w.alpha_a + w.alpha_b + w.alpha_d + w.alpha_o);
}

double regression_cost(const PairAnnotation& g, const PredictionSet& p, int query,
                       const MatchWeights& w, bool git_enabled, bool pini_enabled) {
  double sum = box_term(g.box_a, p.box_a, query, w) +
               box_term(g.box_b, p.box_b, query, w);
  int terms = 2;
  bool use_git = git_enabled && p.box_int.size() > 0 &&
                 (!pini_enabled || intersects(g.box_a, g.box_b));
  if (use_git) {
    Box target = generalized_intersection_box(g.box_a, g.box_b);
    sum += box_term(target, p.box_int, query, w);
    terms += 1;
  }
  return sum / terms;
}

double pair_cost(const PairAnnotation& g, const PredictionSet& p, int query,
                 const MatchWeights& w, bool git_enabled, bool pini_enabled) {
  return w.beta_c * classification_cost(g, p, query, w) +
         w.beta_r * regression_cost(g, p, query, w, git_enabled, pini_enabled);
}

Mat build_cost_matrix(const std::vector<PairAnnotation>& targets,
                      const PredictionSet& p, const MatchWeights& w,
                      bool git_enabled, bool pini_enabled) {
  Mat cost(targets.size(), p.p_a.rows());
  for (int i = 0; i < cost.rows(); ++i)
    for (int j = 0; j < cost.cols(); ++j)
      cost(i, j) = pair_cost(targets[std::size_t(i)], p, j, w, git_enabled,
                             pini_enabled);
  return cost;
}

// Jonker-Volgenant style shortest augmenting path with row/column
// potentials. A bias of j*1e-13 steers equal-cost optima toward lower
// query indices; the reported total comes from the unbiased matrix.
Assignment hungarian_match(const Mat& cost) {
  const int n = int(cost.rows());
  const int m = int(cost.cols());
  if (n == 0) return {{}, 0.0};
  if (n > m)
    throw std::invalid_argument("hungarian_match: more targets than queries");
  if (!cost.allFinite())
    throw std::invalid_argument("hungarian_match: non-finite cost entry");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kBias = 1e-13;

  std::vector<double> u(std::size_t(n) + 1, 0.0), v(std::size_t(m) + 1, 0.0);
  std::vector<int> match(std::size_t(m) + 1, 0), way(std::size_t(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(std::size_t(m) + 1, kInf);
    std::vector<char> used(std::size_t(m) + 1, 0);
    do {
      used[std::size_t(j0)] = 1;
      int i0 = match[std::size_t(j0)], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[std::size_t(j)]) continue;
        double cur = cost(i0 - 1, j - 1) + kBias * (j - 1) - u[std::size_t(i0)] -
                     v[std::size_t(j)];
        if (cur < minv[std::size_t(j)]) {
          minv[std::size_t(j)] = cur;
          way[std::size_t(j)] = j0;
        }
        if (minv[std::size_t(j)] < delta) {
          delta = minv[std::size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(match[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          minv[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[std::size_t(j0)] != 0);
    do {
      int j1 = way[std::size_t(j0)];
      match[std::size_t(j0)] = match[std::size_t(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.query_for_target.assign(std::size_t(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (match[std::size_t(j)] > 0)
      out.query_for_target[std::size_t(match[std::size_t(j)] - 1)] = j - 1;
  }
  for (int i = 0; i < n; ++i)
    out.total_cost += cost(i, out.query_for_target[std::size_t(i)]);
  return out;
}

Assignment hungarian_match(const std::vector<PairAnnotation>& targets,
                           const PredictionSet& p, const MatchWeights& w,
                           bool git_enabled, bool pini_enabled) {
  return hungarian_match(
      build_cost_matrix(targets, p, w, git_enabled, pini_enabled));
}

}  // namespace relocc
