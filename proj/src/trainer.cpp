// Training loops shared by base models, CID continuation, and students.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "cidnst/decode.hpp"
#include "cidnst/metrics.hpp"

namespace cidnst {

namespace {

struct Example {
  const Tensor* x = nullptr;
  std::vector<int> y_eos;
  int index = 0;  // position in the source dataset, salts augmentation
};

// Tokenizes the paired set and, when CTC participates, drops labels that no
// alignment can fit in the subsampled frames. Corpus text never trips this,
// but decoded pseudo-labels can.
std::vector<Example> PrepareExamples(const std::vector<Utterance>& xs,
                                     const std::vector<Transcript>& ys,
                                     const Tokenizer& tok, int subsample,
                                     double ctc_weight, int* skipped) {
  if (xs.size() != ys.size()) {
    Fail(ErrorKind::kShape, "trainer: " + std::to_string(xs.size()) +
                                " utterances vs " + std::to_string(ys.size()) +
                                " transcripts");
  }
  std::vector<Example> out;
  out.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); i++) {
    std::vector<int> body = tok.Encode(ys[i].text);
    if (ctc_weight > 0.0) {
      int enc_rows = (xs[i].frames.Dim(0) + subsample - 1) / subsample;
      if (CtcMinFrames(body) > enc_rows) {
        if (skipped != nullptr) (*skipped)++;
        continue;
      }
    }
    body.push_back(Tokenizer::kEos);
    out.push_back({&xs[i].frames, std::move(body), static_cast<int>(i)});
  }
  return out;
}

void CheckVocab(const ModelConfig& mcfg, const Tokenizer& tok) {
  if (mcfg.vocab != tok.Vocab()) {
    Fail(ErrorKind::kConfig,
         "trainer: tokenizer vocabulary " + std::to_string(tok.Vocab()) +
             " != model vocabulary " + std::to_string(mcfg.vocab));
  }
}

// Deep copy: parameter values are cloned, not shared.
Model CloneModel(const Model& m) {
  Model out = Model::Shaped(m.Config());
  out.LoadState(m.StateDict());
  return out;
}

// Re-raises numeric/optimizer faults as a training fault naming the step.
[[noreturn]] void Diverged(int64_t step, const std::string& detail) {
  Fail(ErrorKind::kTrainingFault,
       "training diverged at step " + std::to_string(step) + ": " + detail);
}

double ScalarOf(const Var& v) { return v->value.At(0); }

// One augmented paired batch, masked per (epoch, utterance) so masks differ
// across epochs but never across reruns.
std::vector<PairedExample> AugmentBatch(const std::vector<Example>& examples,
                                        const std::vector<int>& order,
                                        size_t begin, size_t end,
                                        const AugmentConfig& aug,
                                        uint64_t seed, int epoch) {
  std::vector<PairedExample> batch;
  batch.reserve(end - begin);
  for (size_t i = begin; i < end; i++) {
    const Example& ex = examples[order[i]];
    uint64_t mask_seed = DeriveSeed(
        seed, "aug/" + std::to_string(epoch) + "/" + std::to_string(ex.index));
    batch.push_back({SpecAugment(*ex.x, aug, mask_seed), ex.y_eos});
  }
  return batch;
}

struct BestTracker {
  double best_cer = 0.0;
  int best_epoch = -1;
  std::map<std::string, Tensor> best_state;

  // Strict improvement keeps the earliest best epoch.
  void Offer(const Model& m, double cer, int epoch) {
    if (best_epoch >= 0 && !(cer < best_cer)) return;
    best_cer = cer;
    best_epoch = epoch;
    best_state = m.StateDict();
  }
};

}  // namespace

void TrainerConfig::Validate() const {
  if (epochs < 0) Fail(ErrorKind::kConfig, "trainer.epochs: must be >= 0");
  if (batch_size < 1) {
    Fail(ErrorKind::kConfig, "trainer.batch_size: must be >= 1");
  }
  if (!(ctc_weight >= 0.0 && ctc_weight <= 1.0)) {
    Fail(ErrorKind::kConfig, "trainer.ctc_weight: must be in [0,1]");
  }
  adam.Validate();
  augment.Validate();
}

void CidTrainerConfig::Validate() const {
  base.Validate();
  if (unpaired_batch < 1) {
    Fail(ErrorKind::kConfig, "trainer.unpaired_batch: must be >= 1");
  }
  if (base.epochs > 0) {
    AlphaSchedule sched = alpha;
    sched.total_epochs = base.epochs;
    sched.Validate();
  }
  beta.Validate();
  inner_decode.Validate();
  if (mmd.bandwidth == MmdConfig::Bandwidth::kFixed && !(mmd.sigma > 0.0)) {
    Fail(ErrorKind::kConfig, "trainer.mmd.sigma: must be > 0");
  }
}

double EvalDevCer(const Model& m, const std::vector<Utterance>& dev_x,
                  const std::vector<Transcript>& dev_y, const Tokenizer& tok) {
  if (dev_x.size() != dev_y.size()) {
    Fail(ErrorKind::kShape, "eval: " + std::to_string(dev_x.size()) +
                                " utterances vs " +
                                std::to_string(dev_y.size()) + " transcripts");
  }
  if (dev_x.empty()) Fail(ErrorKind::kEmptyBatch, "eval: empty dev set");
  DecodeConfig dcfg;
  dcfg.beam = 1;
  dcfg.lm_weight = 0.0;
  std::vector<Tensor> feats(dev_x.size());
  for (size_t i = 0; i < dev_x.size(); i++) feats[i] = dev_x[i].frames;
  std::vector<std::vector<Hypothesis>> hyps =
      DecodeUtterances(m, feats, dcfg, nullptr);
  std::vector<Transcript> out(dev_x.size());
  for (size_t i = 0; i < dev_x.size(); i++) {
    out[i] = {dev_x[i].utt_id, tok.Decode(hyps[i][0].body)};
  }
  return ScoreCorpus(dev_y, out).chr.wer;
}

Model TrainSupervised(const std::vector<Utterance>& train_x,
                      const std::vector<Transcript>& train_y,
                      const std::vector<Utterance>& dev_x,
                      const std::vector<Transcript>& dev_y,
                      const ModelConfig& mcfg, const Tokenizer& tok,
                      const TrainerConfig& cfg, const Model* warm_start,
                      TrainStats* stats) {
  cfg.Validate();
  ModelConfig model_cfg = warm_start != nullptr ? warm_start->Config() : mcfg;
  model_cfg.Validate();
  CheckVocab(model_cfg, tok);
  if (train_x.empty()) {
    Fail(ErrorKind::kEmptyBatch, "trainer: empty training set");
  }

  TrainStats local;
  TrainStats& st = stats != nullptr ? *stats : local;
  st = TrainStats();

  std::vector<Example> examples =
      PrepareExamples(train_x, train_y, tok, model_cfg.subsample,
                      cfg.ctc_weight, &st.skipped_infeasible);
  if (examples.empty()) {
    Fail(ErrorKind::kEmptyBatch,
         "trainer: every training label is ctc-infeasible");
  }

  Model m = warm_start != nullptr
                ? CloneModel(*warm_start)
                : Model::Init(model_cfg, DeriveSeed(cfg.seed, "sup/init"));
  if (cfg.epochs == 0) {
    st.untrained = true;
    if (!dev_x.empty()) st.best_dev_cer = EvalDevCer(m, dev_x, dev_y, tok);
    return m;
  }

  Adam opt(&m.MutableParams(), cfg.adam);
  BestTracker best;
  std::vector<int> order(examples.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = static_cast<int>(i);

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; epoch++) {
    Rng rng(DeriveSeed(cfg.seed, "sup/epoch/" + std::to_string(epoch)));
    rng.Shuffle(&order);
    double loss_sum = 0.0;
    int n_steps = 0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(),
                            begin + static_cast<size_t>(cfg.batch_size));
      std::vector<PairedExample> batch = AugmentBatch(
          examples, order, begin, end, cfg.augment, cfg.seed, epoch);
      try {
        Var loss = PairLoss(m, batch, cfg.ctc_weight);
        double value = ScalarOf(loss);
        if (!std::isfinite(value)) Diverged(step, "loss is not finite");
        Backward(loss);
        opt.Step();
        loss_sum += value;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kNumericFault ||
            e.kind() == ErrorKind::kTrainingFault) {
          Diverged(step, e.what());
        }
        throw;
      }
      step++;
      n_steps++;
    }
    st.epoch_loss.push_back(loss_sum / n_steps);
    if (!dev_x.empty()) {
      double cer = EvalDevCer(m, dev_x, dev_y, tok);
      st.epoch_dev_cer.push_back(cer);
      best.Offer(m, cer, epoch);
    }
  }
  st.steps = step;

  if (best.best_epoch >= 0) {
    m.LoadState(best.best_state);
    st.best_dev_cer = best.best_cer;
    st.best_epoch = best.best_epoch;
  }
  return m;
}

Model TrainCid(const Model& warm_start, const std::vector<Utterance>& paired_x,
               const std::vector<Transcript>& paired_y,
               const std::vector<Transcript>& external_text,
               const std::vector<Utterance>& dev_x,
               const std::vector<Transcript>& dev_y, const Tokenizer& tok,
               const CidTrainerConfig& cfg, TrainStats* stats,
               std::vector<LossBreakdown>* loss_log) {
  cfg.Validate();
  const ModelConfig& model_cfg = warm_start.Config();
  CheckVocab(model_cfg, tok);
  if (paired_x.empty()) {
    Fail(ErrorKind::kEmptyBatch, "cid: empty paired set");
  }
  if (external_text.empty()) {
    Fail(ErrorKind::kEmptyBatch, "cid: empty external text");
  }

  TrainStats local;
  TrainStats& st = stats != nullptr ? *stats : local;
  st = TrainStats();

  std::vector<Example> examples =
      PrepareExamples(paired_x, paired_y, tok, model_cfg.subsample,
                      cfg.base.ctc_weight, &st.skipped_infeasible);
  if (examples.empty()) {
    Fail(ErrorKind::kEmptyBatch, "cid: every paired label is ctc-infeasible");
  }
  std::vector<std::vector<int>> text_eos(external_text.size());
  for (size_t i = 0; i < external_text.size(); i++) {
    text_eos[i] = tok.Encode(external_text[i].text);
    text_eos[i].push_back(Tokenizer::kEos);
  }

  Model m = CloneModel(warm_start);
  if (cfg.base.epochs == 0) {
    st.untrained = true;
    if (!dev_x.empty()) st.best_dev_cer = EvalDevCer(m, dev_x, dev_y, tok);
    return m;
  }

  AlphaSchedule alpha_sched = cfg.alpha;
  alpha_sched.total_epochs = cfg.base.epochs;

  Adam opt(&m.MutableParams(), cfg.base.adam);
  BestTracker best;
  std::vector<int> pair_order(examples.size());
  for (size_t i = 0; i < pair_order.size(); i++) {
    pair_order[i] = static_cast<int>(i);
  }
  std::vector<int> speech_order = pair_order;
  std::vector<int> text_order(text_eos.size());
  for (size_t i = 0; i < text_order.size(); i++) {
    text_order[i] = static_cast<int>(i);
  }

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.base.epochs; epoch++) {
    std::string etag = std::to_string(epoch);
    Rng pair_rng(DeriveSeed(cfg.base.seed, "cid/pair/" + etag));
    pair_rng.Shuffle(&pair_order);
    Rng speech_rng(DeriveSeed(cfg.base.seed, "cid/speech/" + etag));
    speech_rng.Shuffle(&speech_order);
    Rng text_rng(DeriveSeed(cfg.base.seed, "cid/text/" + etag));
    text_rng.Shuffle(&text_order);

    double alpha = AlphaAt(epoch, alpha_sched);
    double loss_sum = 0.0;
    int n_steps = 0;
    size_t speech_cursor = 0, text_cursor = 0;
    int speech_take = std::min<int>(cfg.unpaired_batch,
                                    static_cast<int>(speech_order.size()));
    int text_take = std::min<int>(cfg.unpaired_batch,
                                  static_cast<int>(text_order.size()));
    for (size_t begin = 0; begin < pair_order.size();
         begin += static_cast<size_t>(cfg.base.batch_size)) {
      size_t end = std::min(pair_order.size(),
                            begin + static_cast<size_t>(cfg.base.batch_size));
      std::vector<PairedExample> batch = AugmentBatch(
          examples, pair_order, begin, end, cfg.base.augment, cfg.base.seed,
          epoch);
      // Unpaired draws: the speech side reuses paired speech unaugmented
      // (the cycle term decodes its own input), the text side walks the
      // shuffled external pool, both cyclically.
      std::vector<Tensor> speech;
      speech.reserve(static_cast<size_t>(speech_take));
      for (int i = 0; i < speech_take; i++) {
        speech.push_back(*examples[speech_order[speech_cursor]].x);
        speech_cursor = (speech_cursor + 1) % speech_order.size();
      }
      std::vector<std::vector<int>> text;
      text.reserve(static_cast<size_t>(text_take));
      for (int i = 0; i < text_take; i++) {
        text.push_back(text_eos[text_order[text_cursor]]);
        text_cursor = (text_cursor + 1) % text_order.size();
      }
      try {
        SemiResult r =
            SemiLoss(m, batch, speech, text, alpha, cfg.beta,
                     cfg.base.ctc_weight, cfg.inner_decode, cfg.mmd, nullptr);
        double value = ScalarOf(r.total);
        if (!std::isfinite(value)) Diverged(step, "loss is not finite");
        Backward(r.total);
        opt.Step();
        loss_sum += value;
        st.empty_hyps += r.empty_hyps;
        if (loss_log != nullptr) loss_log->push_back(r.breakdown);
      } catch (const Error& e2) {
        if (e2.kind() == ErrorKind::kNumericFault ||
            e2.kind() == ErrorKind::kTrainingFault) {
          Diverged(step, e2.what());
        }
        throw;
      }
      step++;
      n_steps++;
    }
    st.epoch_loss.push_back(loss_sum / n_steps);
    if (!dev_x.empty()) {
      double cer = EvalDevCer(m, dev_x, dev_y, tok);
      st.epoch_dev_cer.push_back(cer);
      best.Offer(m, cer, epoch);
    }
  }
  st.steps = step;

  if (best.best_epoch >= 0) {
    m.LoadState(best.best_state);
    st.best_dev_cer = best.best_cer;
    st.best_epoch = best.best_epoch;
  }
  return m;
}

}  // namespace cidnst
