// cidnst/decode.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/decode.hpp"

#include <algorithm>
#include <cmath>

#include "cidnst/common.hpp"
#include "cidnst/data.hpp"
#include "cidnst/lm.hpp"

namespace cidnst {

void DecodeConfig::Validate() const {
  if (beam < 1) Fail(ErrorKind::kConfig, "decode.beam: must be >= 1");
  if (lm_weight < 0) Fail(ErrorKind::kConfig, "decode.lm_weight: must be >= 0");
  if (!(max_len_ratio > 0)) {
    Fail(ErrorKind::kConfig, "decode.max_len_ratio: must be > 0");
  }
}

int MaxDecodeLen(int enc_rows, const DecodeConfig& cfg) {
  int cap = static_cast<int>(std::floor(enc_rows * cfg.max_len_ratio));
  return cap < 1 ? 1 : cap;
}

namespace {

// pad, sos and unk are never valid emissions; eos and the charset are.
bool Emittable(int id) {
  return id == Tokenizer::kEos || id >= Tokenizer::kReserved;
}

}  // namespace

Hypothesis GreedyDecode(const Model& m, const Tensor& enc_values,
                        const DecodeConfig& cfg) {
  cfg.Validate();
  Model::DecCache cache = m.MakeDecCache(enc_values);
  Model::DecState state = m.InitialDecState();
  int max_len = MaxDecodeLen(enc_values.Dim(0), cfg);
  int vocab = m.Config().vocab;

  Hypothesis hyp;
  int prev = Tokenizer::kSos;
  while (true) {
    std::vector<double> lp = m.StepLogProbs(cache, &state, prev);
    int best = Tokenizer::kEos;
    for (int k = 0; k < vocab; k++) {
      if (Emittable(k) && lp[k] > lp[best]) best = k;
    }
    hyp.model_logprob += lp[best];
    if (best == Tokenizer::kEos) break;
    hyp.body.push_back(best);
    if (static_cast<int>(hyp.body.size()) >= max_len) {
      hyp.truncated = true;
      break;
    }
    prev = best;
  }
  int steps = static_cast<int>(hyp.body.size()) + (hyp.truncated ? 0 : 1);
  hyp.score = cfg.length_norm ? hyp.model_logprob / steps : hyp.model_logprob;
  return hyp;
}

namespace {

// A live search path. `prev` is the last consumed token; stepping on it
// yields the distribution over the path's next emission.
struct Beam {
  std::vector<int> body;
  double model_lp = 0.0, lm_lp = 0.0;
  Model::DecState st;
  Lm::State lst;
  int prev = Tokenizer::kSos;
};

Hypothesis Finalize(const Beam& b, double lm_weight, bool length_norm,
                    bool truncated) {
  Hypothesis h;
  h.body = b.body;
  h.model_logprob = b.model_lp;
  h.lm_logprob = b.lm_lp;
  h.truncated = truncated;
  double total = b.model_lp + lm_weight * b.lm_lp;
  int steps = static_cast<int>(b.body.size()) + (truncated ? 0 : 1);
  if (steps < 1) steps = 1;
  h.score = length_norm ? total / steps : total;
  return h;
}

}  // namespace

std::vector<Hypothesis> BeamDecode(const Model& m, const Tensor& enc_values,
                                   const DecodeConfig& cfg, const Lm* lm) {
  cfg.Validate();
  if (lm != nullptr && lm->Config().vocab != m.Config().vocab) {
    Fail(ErrorKind::kVocab,
         "beam: lm vocabulary " + std::to_string(lm->Config().vocab) +
             " does not match the model's " + std::to_string(m.Config().vocab));
  }
  Model::DecCache cache = m.MakeDecCache(enc_values);
  int max_len = MaxDecodeLen(enc_values.Dim(0), cfg);
  int vocab = m.Config().vocab;
  double w = lm ? cfg.lm_weight : 0.0;

  Beam init;
  init.st = m.InitialDecState();
  if (lm) init.lst = lm->InitialState();
  std::vector<Beam> active{init};
  std::vector<Hypothesis> done;

  // Every child, eos included, competes for the beam slots on the running
  // score; a slot won by eos retires to `done`, one at the length cap
  // retires truncated, the rest stay active. With beam 1 this is exactly
  // greedy decoding.
  for (int step = 0; step < max_len && !active.empty(); step++) {
    struct Child {
      Beam b;
      bool eos = false;
    };
    std::vector<Child> children;
    children.reserve(active.size() * static_cast<size_t>(vocab));
    for (Beam& parent : active) {
      std::vector<double> lp = m.StepLogProbs(cache, &parent.st, parent.prev);
      std::vector<double> lmlp;
      if (lm) lmlp = lm->StepLogProbs(&parent.lst, parent.prev);
      for (int k = 0; k < vocab; k++) {
        if (!Emittable(k)) continue;
        Child child{parent, k == Tokenizer::kEos};  // states already advanced
        child.b.model_lp += lp[static_cast<size_t>(k)];
        if (lm) child.b.lm_lp += lmlp[static_cast<size_t>(k)];
        if (!child.eos) {
          child.b.body.push_back(k);
          child.b.prev = k;
        }
        children.push_back(std::move(child));
      }
    }
    auto running = [&](const Child& a, const Child& b) {
      double sa = a.b.model_lp + w * a.b.lm_lp;
      double sb = b.b.model_lp + w * b.b.lm_lp;
      if (sa != sb) return sa > sb;
      return a.b.body < b.b.body;
    };
    std::sort(children.begin(), children.end(), running);
    if (static_cast<int>(children.size()) > cfg.beam) {
      children.resize(static_cast<size_t>(cfg.beam));
    }
    active.clear();
    for (Child& child : children) {
      if (child.eos) {
        done.push_back(Finalize(child.b, w, cfg.length_norm, false));
      } else if (static_cast<int>(child.b.body.size()) >= max_len) {
        done.push_back(Finalize(child.b, w, cfg.length_norm, true));
      } else {
        active.push_back(std::move(child.b));
      }
    }
  }

  std::sort(done.begin(), done.end(), [](const Hypothesis& a,
                                         const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.body < b.body;
  });
  if (static_cast<int>(done.size()) > cfg.beam) {
    done.resize(static_cast<size_t>(cfg.beam));
  }
  return done;
}

std::vector<std::vector<Hypothesis>> DecodeUtterances(
    const Model& m, const std::vector<Tensor>& features,
    const DecodeConfig& cfg, const Lm* lm) {
  cfg.Validate();
  std::vector<std::vector<Hypothesis>> out(features.size());
  ParallelFor(static_cast<int>(features.size()), [&](int i) {
    Tensor enc = m.EncodeSpeech(features[static_cast<size_t>(i)])->value;
    out[static_cast<size_t>(i)] = BeamDecode(m, enc, cfg, lm);
  });
  return out;
}

}  // namespace cidnst
