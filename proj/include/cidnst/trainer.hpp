// cidnst/trainer.hpp  Training loops: supervised training with augmentation
// (base models and students) and the semi-supervised CID continuation. Both
// retain the best-dev-CER parameters and derive every random draw from the
// config seed, so a run is a pure function of config and data.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_TRAINER_HPP_
#define CIDNST_TRAINER_HPP_

#include <cstdint>
#include <vector>

#include "cidnst/augment.hpp"
#include "cidnst/data.hpp"
#include "cidnst/losses.hpp"
#include "cidnst/model.hpp"
#include "cidnst/optim.hpp"
#include "cidnst/schedules.hpp"

namespace cidnst {

struct TrainerConfig {
  int epochs = 10;          // >= 0; 0 returns the initial parameters
  int batch_size = 8;       // >= 1
  double ctc_weight = 0.3;  // lambda in the pair loss, [0,1]
  AdamConfig adam;
  AugmentConfig augment;
  uint64_t seed = 0;

  void Validate() const;
};

struct CidTrainerConfig {
  TrainerConfig base;
  int unpaired_batch = 8;     // >= 1; speech/text draw per step
  AlphaSchedule alpha;        // total_epochs is taken from base.epochs
  BetaPolicy beta;
  DecodeConfig inner_decode;  // hypothesis generation inside the cycle term
  MmdConfig mmd;

  void Validate() const;
};

struct TrainStats {
  std::vector<double> epoch_loss;     // mean step loss per epoch
  std::vector<double> epoch_dev_cer;  // percent, measured after each epoch
  double best_dev_cer = 0.0;          // CER of the returned parameters
  int best_epoch = -1;                // -1 when untrained or dev is empty
  bool untrained = false;             // epochs == 0
  int skipped_infeasible = 0;         // labels no CTC alignment can fit
  int empty_hyps = 0;                 // cycle hypotheses that fell back
  int64_t steps = 0;                  // optimizer steps taken
};

// Greedy-decodes dev_x and scores character error rate (percent) against
// dev_y. Utterances are paired positionally; ids must agree.
double EvalDevCer(const Model& m, const std::vector<Utterance>& dev_x,
                  const std::vector<Transcript>& dev_y, const Tokenizer& tok);

// Supervised training on (train_x, train_y) with per-utterance augmentation.
// Starts from warm_start when given (its config wins), else from a fresh
// Glorot initialization. When ctc_weight > 0, utterances whose label cannot
// fit any CTC alignment are dropped and counted, not faulted: decoded
// pseudo-labels may be infeasible even when corpus text never is. Keeps the
// parameters of the epoch with the best dev CER. A non-finite loss or
// gradient is a training fault naming the failing step.
Model TrainSupervised(const std::vector<Utterance>& train_x,
                      const std::vector<Transcript>& train_y,
                      const std::vector<Utterance>& dev_x,
                      const std::vector<Transcript>& dev_y,
                      const ModelConfig& mcfg, const Tokenizer& tok,
                      const TrainerConfig& cfg,
                      const Model* warm_start = nullptr,
                      TrainStats* stats = nullptr);

// Semi-supervised continuation from warm_start (deep-copied; the input model
// is never mutated). Every step draws one augmented paired batch and one
// unpaired batch whose speech side is reused from the paired speech and
// whose text side comes from external_text, then optimizes
// alpha*pair + (1-alpha)*unpair with alpha from the epoch schedule and beta
// from the policy. Appends one LossBreakdown per step to loss_log when
// given. Retains the best-dev-CER epoch, as above.
Model TrainCid(const Model& warm_start, const std::vector<Utterance>& paired_x,
               const std::vector<Transcript>& paired_y,
               const std::vector<Transcript>& external_text,
               const std::vector<Utterance>& dev_x,
               const std::vector<Transcript>& dev_y, const Tokenizer& tok,
               const CidTrainerConfig& cfg, TrainStats* stats = nullptr,
               std::vector<LossBreakdown>* loss_log = nullptr);

}  // namespace cidnst

#endif  // CIDNST_TRAINER_HPP_
