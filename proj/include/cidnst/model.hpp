// cidnst/model.hpp  Four-component transduction network: speech front-end f,
// text embedding g, shared encoder, attention decoder d, and a CTC head.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_MODEL_HPP_
#define CIDNST_MODEL_HPP_

#include <map>
#include <string>
#include <vector>

#include "cidnst/autodiff.hpp"

namespace cidnst {

struct ModelConfig {
  // Desk-scale defaults. The width is kept scarce relative to the corpus on
  // purpose: unpaired text training then competes with the speech path for
  // shared encoder capacity, which is the regime where the conservative beta
  // policies earn their keep. With spare width the text term is free and the
  // policy choice stops mattering in the expected direction.
  int feat_dim = 16;    // F
  int hidden = 24;      // H; even, split across the two recurrent directions
  int vocab = 24;       // V, includes the reserved ids; CTC head is V+1 wide
  int subsample = 4;    // r, front-end time reduction
  int dec_hidden = 48;  // decoder recurrent units

  void Validate() const;
  std::string ToJson() const;
  static ModelConfig FromJson(const std::string& json);
};

// Parameters are named tensors in a sorted map, so iteration order (the
// optimizer's and the checkpoint's) is stable. All forward methods are const
// and safe to call concurrently; training owns its model exclusively.
class Model {
 public:
  Model() = default;

  // Glorot-uniform weights, zero biases except recurrent forget gates at 1.
  // Each tensor draws from its own name-derived stream, so the layout of one
  // layer never shifts another's values.
  static Model Init(const ModelConfig& cfg, uint64_t seed);

  // Zero-valued parameters with the right shapes (checkpoint loading).
  static Model Shaped(const ModelConfig& cfg);

  // Wraps caller-owned variables as the parameter set (gradient probing).
  // Names and shapes must match the canonical layout exactly.
  static Model FromParams(const ModelConfig& cfg,
                          std::map<std::string, Var> params);

  const ModelConfig& Config() const { return cfg_; }
  const std::map<std::string, Var>& Params() const { return params_; }
  std::map<std::string, Var>& MutableParams() { return params_; }
  const Var& P(const std::string& name) const;

  // Deep value snapshot and restore; the restored set must match exactly.
  std::map<std::string, Tensor> StateDict() const;
  void LoadState(const std::map<std::string, Tensor>& state);

  // f: [T, F] features -> [ceil(T/r), H] latents. T must be >= r.
  Var Frontend(const Tensor& x) const;
  // g: token ids -> [|ids|, H]; ids must be proper vocabulary ids.
  Var EmbedText(const std::vector<int>& ids) const;
  // Shared encoder: [L, H] -> [L, H], length preserved.
  Var SharedEncode(const Var& b) const;
  // e(x) and the text-side composition with the shared encoder.
  Var EncodeSpeech(const Tensor& x) const;
  Var EncodeText(const std::vector<int>& ids) const;

  // Teacher-forced per-step log-probabilities, [|y|, V]; y must end with
  // eos. Step t conditions on y_{t-1} (sos at t=0) and attends over enc.
  Var TeacherForced(const Var& enc, const std::vector<int>& y_with_eos) const;
  // Per-frame CTC log-distributions over V+1 classes (blank last).
  Var CtcLogProbs(const Var& enc) const;

  // Value-only incremental decoding against an immutable snapshot.
  struct DecCache {
    Tensor enc;   // [L, H]
    Tensor keys;  // [L, A] attention keys
  };
  struct DecState {
    std::vector<double> h, c;  // decoder LSTM state
  };
  DecCache MakeDecCache(const Tensor& enc_values) const;
  DecState InitialDecState() const;
  // Advances state on prev_token and returns the V log-probabilities.
  std::vector<double> StepLogProbs(const DecCache& cache, DecState* state,
                                   int prev_token) const;

 private:
  ModelConfig cfg_;
  std::map<std::string, Var> params_;
};

}  // namespace cidnst

#endif  // CIDNST_MODEL_HPP_
