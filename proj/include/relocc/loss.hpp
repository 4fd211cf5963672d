#pragma once

#include <vector>

#include "relocc/matching.hpp"
#include "relocc/model.hpp"
#include "relocc/scene.hpp"
#include "relocc/tensor.hpp"

namespace relocc {

struct MatchedPair {
  PairAnnotation target;
  int query = -1;
};

std::vector<MatchedPair> to_matched(const std::vector<PairAnnotation>& targets,
                                    const Assignment& a);

// Matched queries pay weighted NLL on all four heads; unmatched queries pay
// the background term on the two object heads. Built on the live tape so
// gradients flow to the head outputs.
Var classification_loss(Tape& t, const PredictionVars& p,
                        const std::vector<MatchedPair>& matched,
                        const MatchWeights& w);

// Sum over matched queries of per-box L1 + GIoU terms; the intersection box
// joins when predicted (and, under the intersection gate, only for literally
// intersecting target pairs). Unmatched queries contribute nothing.
Var regression_loss(Tape& t, const PredictionVars& p,
                    const std::vector<MatchedPair>& matched,
                    const MatchWeights& w, bool git_enabled, bool pini_enabled);

// beta_c * classification + beta_r * regression.
Var total_loss(Tape& t, const PredictionVars& p,
               const std::vector<MatchedPair>& matched, const MatchWeights& w,
               bool git_enabled, bool pini_enabled);

}  // namespace relocc
