// cidnst/decode.hpp  Inference over a trained model: greedy and beam search
// with optional shallow language-model fusion. Attention-only scoring; the
// CTC head takes no part in search.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_DECODE_HPP_
#define CIDNST_DECODE_HPP_

#include <string>
#include <vector>

#include "cidnst/model.hpp"

namespace cidnst {

class Lm;

struct DecodeConfig {
  int beam = 20;              // >= 1
  double lm_weight = 0.3;     // >= 0; only applied when an LM is fused
  double max_len_ratio = 1.5; // output length cap relative to encoder frames
  bool length_norm = true;

  void Validate() const;
};

struct Hypothesis {
  std::vector<int> body;     // token ids, eos excluded
  double score = 0.0;        // ranking score; length-normalized when enabled
  double model_logprob = 0.0;  // summed model log-probs including eos
  double lm_logprob = 0.0;     // summed LM log-probs including eos
  bool truncated = false;      // hit the length cap before eos
};

// Hard cap on emitted body length for an encoder output of `enc_rows` frames.
int MaxDecodeLen(int enc_rows, const DecodeConfig& cfg);

// Argmax decoding. Candidates are the characters and eos; ties break toward
// the smaller id. Deterministic for fixed parameters.
Hypothesis GreedyDecode(const Model& m, const Tensor& enc_values,
                        const DecodeConfig& cfg);

// Beam search over the same candidate set, scored by
//   model_logprob + lm_weight * lm_logprob  (lm omitted when null),
// length-normalized by |body|+1 when enabled (by |body| for truncated
// hypotheses, matching greedy). Returns up to `beam` finished hypotheses,
// best first; ties order by lexicographically smaller body.
std::vector<Hypothesis> BeamDecode(const Model& m, const Tensor& enc_values,
                                   const DecodeConfig& cfg, const Lm* lm);

// Encodes and beam-decodes each utterance independently, in parallel up to
// MaxThreads() against the immutable model and LM snapshots. Result order
// follows the input order.
std::vector<std::vector<Hypothesis>> DecodeUtterances(
    const Model& m, const std::vector<Tensor>& features,
    const DecodeConfig& cfg, const Lm* lm);

}  // namespace cidnst

#endif  // CIDNST_DECODE_HPP_
