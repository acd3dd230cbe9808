// cidnst/losses.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/losses.hpp"

#include <cmath>
#include <limits>

#include "cidnst/common.hpp"
#include "cidnst/data.hpp"

namespace cidnst {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

// Mean of scalar terms, summed left to right.
Var MeanOf(const std::vector<Var>& terms) {
  Var sum = terms[0];
  for (size_t i = 1; i < terms.size(); i++) sum = Add(sum, terms[i]);
  return Scale(sum, 1.0 / static_cast<double>(terms.size()));
}

// Extended label: blanks interleaved around y, 2n+1 states.
int ExtLabel(const std::vector<int>& y, int blank, int s) {
  return s % 2 == 0 ? blank : y[s / 2];
}

// Forward DP over the extended label; out[t][s] includes the emission at t.
void CtcAlpha(const Tensor& lp, const std::vector<int>& y, int blank,
              std::vector<std::vector<double>>* out) {
  int frames = lp.Dim(0);
  int states = 2 * static_cast<int>(y.size()) + 1;
  out->assign(frames, std::vector<double>(states, kNegInf));
  (*out)[0][0] = lp.At(0, blank);
  if (states > 1) (*out)[0][1] = lp.At(0, ExtLabel(y, blank, 1));
  for (int t = 1; t < frames; t++) {
    for (int s = 0; s < states; s++) {
      int lab = ExtLabel(y, blank, s);
      double acc = (*out)[t - 1][s];
      if (s >= 1) acc = LogAdd(acc, (*out)[t - 1][s - 1]);
      if (s >= 2 && lab != blank && lab != ExtLabel(y, blank, s - 2)) {
        acc = LogAdd(acc, (*out)[t - 1][s - 2]);
      }
      (*out)[t][s] = acc == kNegInf ? kNegInf : acc + lp.At(t, lab);
    }
  }
}

// Suffix DP; out[t][s] excludes everything at time t, so alpha[t][s] +
// beta[t][s] is the mass of all alignments passing through (t, s).
void CtcBeta(const Tensor& lp, const std::vector<int>& y, int blank,
             std::vector<std::vector<double>>* out) {
  int frames = lp.Dim(0);
  int states = 2 * static_cast<int>(y.size()) + 1;
  out->assign(frames, std::vector<double>(states, kNegInf));
  (*out)[frames - 1][states - 1] = 0.0;
  if (states > 1) (*out)[frames - 1][states - 2] = 0.0;
  for (int t = frames - 2; t >= 0; t--) {
    for (int s = 0; s < states; s++) {
      double acc = (*out)[t + 1][s] == kNegInf
                       ? kNegInf
                       : (*out)[t + 1][s] + lp.At(t + 1, ExtLabel(y, blank, s));
      if (s + 1 < states && (*out)[t + 1][s + 1] != kNegInf) {
        acc = LogAdd(acc,
                     (*out)[t + 1][s + 1] + lp.At(t + 1, ExtLabel(y, blank, s + 1)));
      }
      if (s + 2 < states) {
        int lab = ExtLabel(y, blank, s + 2);
        if (lab != blank && lab != ExtLabel(y, blank, s) &&
            (*out)[t + 1][s + 2] != kNegInf) {
          acc = LogAdd(acc, (*out)[t + 1][s + 2] + lp.At(t + 1, lab));
        }
      }
      (*out)[t][s] = acc;
    }
  }
}

}  // namespace

int CtcMinFrames(const std::vector<int>& y_body) {
  int repeats = 0;
  for (size_t i = 0; i + 1 < y_body.size(); i++) {
    if (y_body[i] == y_body[i + 1]) repeats++;
  }
  return static_cast<int>(y_body.size()) + repeats;
}

Var CtcLoss(const Var& frame_logprobs, const std::vector<int>& y_body) {
  const Tensor& lp = frame_logprobs->value;
  if (lp.Rank() != 2 || lp.Dim(1) < 2) {
    Fail(ErrorKind::kShape, "ctc: want [L, V+1] log-probs, got " + lp.ShapeStr());
  }
  if (lp.Dim(0) < 1) Fail(ErrorKind::kEmptyBatch, "ctc: no frames");
  int blank = lp.Dim(1) - 1;
  for (int id : y_body) {
    if (id < 0 || id >= blank) {
      Fail(ErrorKind::kVocab, "ctc: label id " + std::to_string(id) +
                                  " outside vocabulary of size " +
                                  std::to_string(blank));
    }
  }
  int frames = lp.Dim(0);
  if (frames < CtcMinFrames(y_body)) {
    Fail(ErrorKind::kCtcInfeasible,
         "ctc: label of length " + std::to_string(y_body.size()) + " needs " +
             std::to_string(CtcMinFrames(y_body)) + " frames, have " +
             std::to_string(frames));
  }

  std::vector<std::vector<double>> alpha;
  CtcAlpha(lp, y_body, blank, &alpha);
  int states = 2 * static_cast<int>(y_body.size()) + 1;
  double log_p = alpha[frames - 1][states - 1];
  if (states > 1) log_p = LogAdd(log_p, alpha[frames - 1][states - 2]);
  double nll = -log_p;
  if (!std::isfinite(nll)) {
    Fail(ErrorKind::kNumericFault, "ctc: non-finite alignment probability");
  }

  auto node = std::make_shared<Node>();
  node->op = "ctc";
  node->value = Tensor::Scalar(nll);
  node->parents = {frame_logprobs};
  node->requires_grad = frame_logprobs->requires_grad;
  if (node->requires_grad) {
    std::vector<int> y = y_body;
    node->vjp = [y, blank, log_p, alpha](Node& n) {
      const Var& parent = n.parents[0];
      if (!parent->requires_grad) return;
      const Tensor& plp = parent->value;
      std::vector<std::vector<double>> beta;
      CtcBeta(plp, y, blank, &beta);
      double g = n.grad.At(static_cast<size_t>(0));
      Tensor& d = parent->EnsureGrad();
      int frames = plp.Dim(0);
      int states = 2 * static_cast<int>(y.size()) + 1;
      for (int t = 0; t < frames; t++) {
        for (int s = 0; s < states; s++) {
          double post = alpha[t][s] + beta[t][s];
          if (post == kNegInf) continue;
          d.At(t, ExtLabel(y, blank, s)) -= g * std::exp(post - log_p);
        }
      }
    };
  }
  return node;
}

Var MeanAbsDiff(const Var& a, const Var& b) {
  return Scale(L1Norm(Sub(a, b)), 1.0 / static_cast<double>(a->value.Numel()));
}

Var AttentionNll(const Model& m, const Var& enc,
                 const std::vector<int>& y_eos) {
  Var lp = m.TeacherForced(enc, y_eos);
  Var picked = GatherCols(lp, y_eos);
  return Scale(SumAll(picked), -1.0 / static_cast<double>(y_eos.size()));
}

Var PairLoss(const Model& m, const std::vector<PairedExample>& batch,
             double ctc_weight) {
  if (batch.empty()) Fail(ErrorKind::kEmptyBatch, "pair loss: empty batch");
  if (ctc_weight < 0.0 || ctc_weight > 1.0) {
    Fail(ErrorKind::kRange, "pair loss: ctc_weight outside [0,1]");
  }
  std::vector<Var> terms;
  terms.reserve(batch.size());
  for (const PairedExample& ex : batch) {
    if (ex.y_eos.empty() || ex.y_eos.back() != Tokenizer::kEos) {
      Fail(ErrorKind::kFormat, "pair loss: target must end with eos");
    }
    Var enc = m.EncodeSpeech(ex.x);
    std::vector<int> body(ex.y_eos.begin(), ex.y_eos.end() - 1);
    Var term;
    if (ctc_weight < 1.0) term = AttentionNll(m, enc, ex.y_eos);
    if (ctc_weight > 0.0) {
      Var ctc = Scale(CtcLoss(m.CtcLogProbs(enc), body),
                      1.0 / std::max<size_t>(1, body.size()));
      term = term ? Add(Scale(term, 1.0 - ctc_weight), Scale(ctc, ctc_weight))
                  : ctc;
    }
    terms.push_back(term);
  }
  return MeanOf(terms);
}

Var IdtLoss(const Model& m, const Var& b) {
  return MeanAbsDiff(m.SharedEncode(b), b);
}

Var TextLoss(const Model& m, const std::vector<int>& y_eos) {
  if (y_eos.empty() || y_eos.back() != Tokenizer::kEos) {
    Fail(ErrorKind::kFormat, "text loss: target must end with eos");
  }
  return AttentionNll(m, m.EncodeText(y_eos), y_eos);
}

namespace {

std::vector<int> HypOrFallback(std::vector<int> body, int* empty_count) {
  if (body.empty()) {
    body.push_back(Tokenizer::kSos);
    if (empty_count) (*empty_count)++;
  }
  return body;
}

}  // namespace

Var CycDomLoss(const Model& m, const Tensor& x, const DecodeConfig& dcfg,
               const MmdConfig& mcfg) {
  Var ex = m.EncodeSpeech(x);
  std::vector<int> hyp =
      HypOrFallback(GreedyDecode(m, ex->value, dcfg).body, nullptr);
  Var cycle = m.SharedEncode(m.EmbedText(hyp));
  return MmdNode(ex, cycle, ResolveSigma(ex->value, cycle->value, mcfg));
}

SemiResult SemiLoss(const Model& m, const std::vector<PairedExample>& paired,
                    const std::vector<Tensor>& speech,
                    const std::vector<std::vector<int>>& text_eos,
                    double alpha, const BetaPolicy& policy, double ctc_weight,
                    const DecodeConfig& dcfg, const MmdConfig& mcfg,
                    FrozenChoices* frozen) {
  if (alpha < 0.0 || alpha > 1.0) {
    Fail(ErrorKind::kRange, "semi loss: alpha outside [0,1]");
  }
  if (speech.empty() && text_eos.empty()) {
    Fail(ErrorKind::kEmptyBatch, "semi loss: both unpaired sides empty");
  }
  bool replay = frozen && frozen->replay;
  if (replay && (frozen->hyps.size() != speech.size() ||
                 frozen->sigmas.size() != speech.size())) {
    Fail(ErrorKind::kConflict, "semi loss: frozen choices do not match batch");
  }

  Var pair = PairLoss(m, paired, ctc_weight);

  int empty_hyps = 0;
  std::vector<Var> idt_terms, cyc_terms, text_terms;
  for (size_t i = 0; i < speech.size(); i++) {
    Var fx = m.Frontend(speech[i]);
    Var ex = m.SharedEncode(fx);
    idt_terms.push_back(MeanAbsDiff(ex, fx));
    std::vector<int> hyp =
        replay ? frozen->hyps[i]
               : HypOrFallback(GreedyDecode(m, ex->value, dcfg).body,
                               &empty_hyps);
    Var cycle = m.SharedEncode(m.EmbedText(hyp));
    double sigma = replay ? frozen->sigmas[i]
                          : ResolveSigma(ex->value, cycle->value, mcfg);
    cyc_terms.push_back(MmdNode(ex, cycle, sigma));
    if (frozen && !replay) {
      frozen->hyps.push_back(hyp);
      frozen->sigmas.push_back(sigma);
    }
  }
  for (const std::vector<int>& y : text_eos) {
    if (y.empty() || y.back() != Tokenizer::kEos) {
      Fail(ErrorKind::kFormat, "semi loss: text target must end with eos");
    }
    Var ty = m.EmbedText(y);
    Var ety = m.SharedEncode(ty);
    idt_terms.push_back(MeanAbsDiff(ety, ty));
    text_terms.push_back(AttentionNll(m, ety, y));
  }
  if (frozen && !replay) frozen->empty_hyps = empty_hyps;
  if (replay) empty_hyps = frozen->empty_hyps;

  Var l_idt = MeanOf(idt_terms);
  Var l_cyc = cyc_terms.empty() ? Constant(Tensor::Scalar(0.0))
                                : MeanOf(cyc_terms);
  Var l_text = text_terms.empty() ? Constant(Tensor::Scalar(0.0))
                                  : MeanOf(text_terms);

  BetaResolution res = ResolveBeta(l_idt->value.Item(), l_cyc->value.Item(),
                                   l_text->value.Item(), policy);
  double beta = res.beta_used;
  Var unpair =
      Add(l_idt, Add(Scale(l_cyc, beta), Scale(l_text, 1.0 - beta)));
  Var total = Add(Scale(pair, alpha), Scale(unpair, 1.0 - alpha));

  SemiResult out;
  out.total = total;
  out.empty_hyps = empty_hyps;
  out.breakdown.l_pair = pair->value.Item();
  out.breakdown.l_idt = l_idt->value.Item();
  out.breakdown.l_cyc_dom = l_cyc->value.Item();
  out.breakdown.l_text = l_text->value.Item();
  out.breakdown.l_unpair = unpair->value.Item();
  out.breakdown.l_total = total->value.Item();
  out.breakdown.beta_used = beta;
  out.breakdown.alpha_used = alpha;
  return out;
}

}  // namespace cidnst
