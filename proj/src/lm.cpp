// cidnst/lm.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cidnst/checkpoint.hpp"
#include "cidnst/common.hpp"
#include "cidnst/data.hpp"
#include "cidnst/nn.hpp"
#include "json.hpp"

namespace cidnst {
namespace {

std::vector<ParamSpec> SpecsFor(const LmConfig& cfg) {
  int v = cfg.vocab, h = cfg.hidden;
  return {
      {"emb.table", v, h, ParamSpec::kWeight},
      {"lstm.wx", h, 4 * h, ParamSpec::kWeight},
      {"lstm.wh", h, 4 * h, ParamSpec::kWeight},
      {"lstm.b", 1, 4 * h, ParamSpec::kLstmBias},
      {"out.w", h, v, ParamSpec::kWeight},
      {"out.b", 1, v, ParamSpec::kBias},
  };
}

void CheckIds(const std::vector<int>& ids, int vocab) {
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      Fail(ErrorKind::kVocab, "lm: token id " + std::to_string(id) +
                                  " out of vocabulary of size " +
                                  std::to_string(vocab));
    }
  }
}

}  // namespace

void LmConfig::Validate() const {
  if (vocab <= Tokenizer::kReserved) {
    Fail(ErrorKind::kConfig, "lm.vocab: must exceed the reserved ids");
  }
  if (hidden < 1) Fail(ErrorKind::kConfig, "lm.hidden: must be >= 1");
}

std::string LmConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["vocab"] = vocab;
  j["hidden"] = hidden;
  return j.dump();
}

LmConfig LmConfig::FromJson(const std::string& json) {
  nlohmann::json j = nlohmann::json::parse(json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    Fail(ErrorKind::kFormat, "lm config: not a JSON object");
  }
  for (auto& [key, _] : j.items()) {
    if (key != "vocab" && key != "hidden") {
      Fail(ErrorKind::kFormat, "lm config: unknown key " + key);
    }
  }
  LmConfig cfg;
  try {
    cfg.vocab = j.at("vocab").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("lm config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

Lm Lm::Init(const LmConfig& cfg, uint64_t seed) {
  cfg.Validate();
  Lm lm;
  lm.cfg_ = cfg;
  lm.params_ = InitParams(SpecsFor(cfg), seed);
  return lm;
}

Lm Lm::Shaped(const LmConfig& cfg) {
  cfg.Validate();
  Lm lm;
  lm.cfg_ = cfg;
  lm.params_ = ShapedParams(SpecsFor(cfg));
  return lm;
}

Lm Lm::FromParams(const LmConfig& cfg, std::map<std::string, Var> params) {
  cfg.Validate();
  ValidateParams(SpecsFor(cfg), params, "lm");
  Lm lm;
  lm.cfg_ = cfg;
  lm.params_ = std::move(params);
  return lm;
}

std::map<std::string, Tensor> Lm::StateDict() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, var] : params_) out.emplace(name, var->value);
  return out;
}

void Lm::LoadState(const std::map<std::string, Tensor>& state) {
  if (state.size() != params_.size()) {
    Fail(ErrorKind::kFormat, "lm state: parameter count mismatch");
  }
  for (auto& [name, var] : params_) {
    auto it = state.find(name);
    if (it == state.end()) {
      Fail(ErrorKind::kFormat, "lm state: missing parameter " + name);
    }
    if (!it->second.SameShape(var->value)) {
      Fail(ErrorKind::kFormat, "lm state: shape mismatch for " + name);
    }
    var->value = it->second;
  }
}

Var Lm::TeacherForced(const std::vector<int>& y_with_eos) const {
  if (y_with_eos.empty() || y_with_eos.back() != Tokenizer::kEos) {
    Fail(ErrorKind::kFormat, "lm: target must end with eos");
  }
  CheckIds(y_with_eos, cfg_.vocab);
  int n = static_cast<int>(y_with_eos.size());
  std::vector<int> prev(n);
  prev[0] = Tokenizer::kSos;
  for (int i = 1; i < n; i++) prev[i] = y_with_eos[i - 1];

  Var emb = Embedding(params_.at("emb.table"), prev);
  LstmParams cell = FindLstm(params_, "lstm");
  Var h = Constant(Tensor({1, cfg_.hidden}));
  Var c = Constant(Tensor({1, cfg_.hidden}));
  std::vector<Var> rows(n);
  for (int t = 0; t < n; t++) {
    LstmGraphStep(cell, SliceRows(emb, t, t + 1), &h, &c);
    rows[t] = AddRowVec(MatMul(h, params_.at("out.w")), params_.at("out.b"));
  }
  return LogSoftmaxRows(StackRows(rows));
}

Lm::State Lm::InitialState() const {
  State s;
  s.h.assign(cfg_.hidden, 0.0);
  s.c.assign(cfg_.hidden, 0.0);
  return s;
}

std::vector<double> Lm::StepLogProbs(State* state, int prev_token) const {
  CheckIds({prev_token}, cfg_.vocab);
  int h = cfg_.hidden;
  const Tensor& emb = params_.at("emb.table")->value;
  LstmValueStep(FindLstm(params_, "lstm"),
                emb.Data() + static_cast<size_t>(prev_token) * h, &state->h,
                &state->c);
  std::vector<double> logits(params_.at("out.b")->value.Vec());
  AccumMatVec(state->h.data(), params_.at("out.w")->value, logits.data());
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  lse = mx + std::log(lse);
  for (double& l : logits) l -= lse;
  return logits;
}

std::vector<double> Lm::PrefixLogProbs(const std::vector<int>& prefix) const {
  CheckIds(prefix, cfg_.vocab);
  State s = InitialState();
  std::vector<double> lp = StepLogProbs(&s, Tokenizer::kSos);
  for (int id : prefix) lp = StepLogProbs(&s, id);
  return lp;
}

void LmTrainConfig::Validate() const {
  if (epochs < 0) Fail(ErrorKind::kConfig, "lm.epochs: must be >= 0");
  if (batch_size < 1) Fail(ErrorKind::kConfig, "lm.batch_size: must be >= 1");
  adam.Validate();
}

Lm TrainLm(const std::vector<std::vector<int>>& texts, const LmConfig& cfg,
           const LmTrainConfig& tcfg, LmTrainLog* log) {
  cfg.Validate();
  tcfg.Validate();
  if (texts.empty()) Fail(ErrorKind::kEmptyBatch, "lm: empty corpus");
  for (const auto& t : texts) CheckIds(t, cfg.vocab);

  Lm lm = Lm::Init(cfg, DeriveSeed(tcfg.seed, "lm/init"));
  Adam opt(&lm.MutableParams(), tcfg.adam);
  int n = static_cast<int>(texts.size());

  for (int epoch = 0; epoch < tcfg.epochs; epoch++) {
    Rng rng(DeriveSeed(tcfg.seed, "lm/epoch/" + std::to_string(epoch)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.Shuffle(&order);

    double epoch_total = 0.0;
    size_t epoch_tokens = 0;
    for (int lo = 0; lo < n; lo += tcfg.batch_size) {
      int hi = std::min(n, lo + tcfg.batch_size);
      Var sum;
      size_t tokens = 0;
      for (int i = lo; i < hi; i++) {
        std::vector<int> y = texts[static_cast<size_t>(order[i])];
        y.push_back(Tokenizer::kEos);
        Var picked = SumAll(GatherCols(lm.TeacherForced(y), y));
        sum = sum ? Add(sum, picked) : picked;
        tokens += y.size();
      }
      Var loss = Scale(sum, -1.0 / static_cast<double>(tokens));
      Backward(loss);
      opt.Step();
      epoch_total += loss->value.Item() * static_cast<double>(tokens);
      epoch_tokens += tokens;
    }
    if (log) {
      log->epoch_nll.push_back(epoch_total /
                               static_cast<double>(epoch_tokens));
    }
  }
  return lm;
}

double Perplexity(const Lm& lm, const std::vector<std::vector<int>>& texts) {
  if (texts.empty()) Fail(ErrorKind::kEmptyBatch, "lm: empty corpus");
  double total = 0.0;
  size_t tokens = 0;
  for (const auto& body : texts) {
    CheckIds(body, lm.Config().vocab);
    Lm::State s = lm.InitialState();
    int prev = Tokenizer::kSos;
    for (size_t i = 0; i <= body.size(); i++) {
      int target = i < body.size() ? body[i] : Tokenizer::kEos;
      std::vector<double> lp = lm.StepLogProbs(&s, prev);
      total -= lp[static_cast<size_t>(target)];
      prev = target;
      tokens++;
    }
  }
  return std::exp(total / static_cast<double>(tokens));
}

void SaveLm(const std::string& path, const Lm& lm) {
  SaveNamedTensors(path, kLmMagic, lm.Config().ToJson(), lm.StateDict());
}

Lm LoadLm(const std::string& path) {
  NamedTensorFile file = LoadNamedTensors(path, kLmMagic);
  Lm lm = Lm::Shaped(LmConfig::FromJson(file.config_json));
  lm.LoadState(file.tensors);
  return lm;
}

}  // namespace cidnst
