// cidnst/losses.hpp  The training objectives: the joint supervised loss, the
// identity, cycle-domain, and text-reconstruction terms, their beta-weighted
// unpaired combination, and the alpha-weighted semi-supervised total.
//
// All sequence losses are normalized per element or per predicted token so
// the alpha and beta weights trade off scale-comparable quantities.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_LOSSES_HPP_
#define CIDNST_LOSSES_HPP_

#include <vector>

#include "cidnst/decode.hpp"
#include "cidnst/mmd.hpp"
#include "cidnst/model.hpp"
#include "cidnst/schedules.hpp"

namespace cidnst {

struct PairedExample {
  Tensor x;                // [T, F] features
  std::vector<int> y_eos;  // token ids ending with eos
};

struct LossBreakdown {
  double l_pair = 0.0;
  double l_idt = 0.0;
  double l_cyc_dom = 0.0;
  double l_text = 0.0;
  double l_unpair = 0.0;
  double l_total = 0.0;
  double beta_used = 0.0;
  double alpha_used = 0.0;
};

// Discrete choices made inside the semi-supervised loss (greedy hypotheses
// and MMD bandwidths). Captured on a normal pass, then replayed verbatim so
// finite-difference probes see a smooth function of the parameters.
struct FrozenChoices {
  bool replay = false;
  std::vector<std::vector<int>> hyps;  // per speech utterance, fallback applied
  std::vector<double> sigmas;          // per speech utterance
  int empty_hyps = 0;                  // hypotheses that fell back to sos
};

// Frames a label needs under CTC: one per token plus one separator per
// adjacent repeated pair.
int CtcMinFrames(const std::vector<int>& y_body);

// -log total probability over all blank-augmented alignments of y_body in
// frame_logprobs ([L, V+1], blank = V), forward algorithm in log space.
// Labels needing more than L frames are a ctc-infeasible error.
Var CtcLoss(const Var& frame_logprobs, const std::vector<int>& y_body);

// Mean over elements of |a - b|; operands must share a shape.
Var MeanAbsDiff(const Var& a, const Var& b);

// Teacher-forced negative log-likelihood of y under the decoder attending
// over enc, divided by the number of predicted tokens.
Var AttentionNll(const Model& m, const Var& enc, const std::vector<int>& y_eos);

// (1-lambda) * attention NLL + lambda * per-token CTC NLL, averaged over the
// batch. lambda in [0,1]; endpoints skip the unused term entirely.
Var PairLoss(const Model& m, const std::vector<PairedExample>& batch,
             double ctc_weight);

// Identity term: mean |shared_encode(b) - b| for a latent sequence b.
Var IdtLoss(const Model& m, const Var& b);

// Text reconstruction: attention NLL of y over its own encoded embedding.
Var TextLoss(const Model& m, const std::vector<int>& y_eos);

// Cycle-domain term for one utterance: MMD between the frames of e(x) and
// the frames of the re-encoded greedy hypothesis. The hypothesis is a frozen
// discrete step; gradients flow through both frame sets.
Var CycDomLoss(const Model& m, const Tensor& x, const DecodeConfig& dcfg,
               const MmdConfig& mcfg);

struct SemiResult {
  Var total;  // backward target
  LossBreakdown breakdown;
  int empty_hyps = 0;
};

// alpha * pair + (1-alpha) * (idt + beta*cyc + (1-beta)*text) with beta
// resolved by the policy on the component values. The paired batch must be
// nonempty, and at least one unpaired side must be nonempty. `frozen` may be
// null; pass a captured FrozenChoices with replay=true to pin the discrete
// choices.
SemiResult SemiLoss(const Model& m, const std::vector<PairedExample>& paired,
                    const std::vector<Tensor>& speech,
                    const std::vector<std::vector<int>>& text_eos,
                    double alpha, const BetaPolicy& policy, double ctc_weight,
                    const DecodeConfig& dcfg, const MmdConfig& mcfg,
                    FrozenChoices* frozen);

}  // namespace cidnst

#endif  // CIDNST_LOSSES_HPP_
