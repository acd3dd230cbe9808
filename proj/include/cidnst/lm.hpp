// cidnst/lm.hpp  Character-level recurrent language model for shallow
// fusion. One LSTM layer over the shared tokenizer vocabulary; every step
// emits a normalized log-distribution over the V ids.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_LM_HPP_
#define CIDNST_LM_HPP_

#include <map>
#include <string>
#include <vector>

#include "cidnst/autodiff.hpp"
#include "cidnst/optim.hpp"

namespace cidnst {

struct LmConfig {
  int vocab = 24;   // must match the ASR tokenizer's vocabulary
  int hidden = 64;  // recurrent units

  void Validate() const;
  std::string ToJson() const;
  static LmConfig FromJson(const std::string& json);
};

class Lm {
 public:
  Lm() = default;

  static Lm Init(const LmConfig& cfg, uint64_t seed);
  // Zero-valued parameters: the uniform model (checkpoint loading).
  static Lm Shaped(const LmConfig& cfg);
  // Wraps caller-owned variables as the parameter set (gradient probing).
  static Lm FromParams(const LmConfig& cfg, std::map<std::string, Var> params);

  const LmConfig& Config() const { return cfg_; }
  const std::map<std::string, Var>& Params() const { return params_; }
  std::map<std::string, Var>& MutableParams() { return params_; }

  std::map<std::string, Tensor> StateDict() const;
  void LoadState(const std::map<std::string, Tensor>& state);

  // Per-step next-token log-probabilities, [|y|, V]; step t conditions on
  // y_{t-1} (sos at t=0). y must end with eos; ids must lie in [0, V).
  Var TeacherForced(const std::vector<int>& y_with_eos) const;

  // Value-only incremental scoring; safe to run concurrently per state.
  struct State {
    std::vector<double> h, c;
  };
  State InitialState() const;
  // Advances the state on prev_token and returns the V log-probabilities.
  std::vector<double> StepLogProbs(State* state, int prev_token) const;
  // Log-probabilities of the token following `prefix` (body ids, no sos);
  // the empty prefix scores the first token from the start state.
  std::vector<double> PrefixLogProbs(const std::vector<int>& prefix) const;

 private:
  LmConfig cfg_;
  std::map<std::string, Var> params_;
};

struct LmTrainConfig {
  int epochs = 30;
  int batch_size = 8;  // sequences per optimizer step
  AdamConfig adam{.lr = 5e-3};
  uint64_t seed = 0;

  void Validate() const;
};

// Mean per-token negative log-likelihood, one entry per epoch.
struct LmTrainLog {
  std::vector<double> epoch_nll;
};

// NLL training over token sequences (body ids; eos is appended as the final
// prediction target internally). Deterministic given the seed.
Lm TrainLm(const std::vector<std::vector<int>>& texts, const LmConfig& cfg,
           const LmTrainConfig& tcfg, LmTrainLog* log = nullptr);

// exp(mean per-token NLL) over the corpus, eos targets included; always >= 1
// for normalized models. The uniform model scores exactly V.
double Perplexity(const Lm& lm, const std::vector<std::vector<int>>& texts);

// Checkpoint container with magic "CIDL"; loading validates the config echo.
void SaveLm(const std::string& path, const Lm& lm);
Lm LoadLm(const std::string& path);

}  // namespace cidnst

#endif  // CIDNST_LM_HPP_
