// cidnst/metrics.hpp  Edit-distance alignment, corpus-level WER/CER with the
// insertion/deletion/substitution breakdown, and relative error reduction.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_METRICS_HPP_
#define CIDNST_METRICS_HPP_

#include <string>
#include <vector>

#include "cidnst/data.hpp"

namespace cidnst {

enum class EditOp { kMatch, kSub, kIns, kDel };

struct AlignStep {
  EditOp op;
  int ref_idx;  // -1 for insertions
  int hyp_idx;  // -1 for deletions
};

// Minimal unit-cost edit script turning ref into hyp. Ties prefer
// substitution over insertion over deletion, so scripts are deterministic.
std::vector<AlignStep> Align(const std::vector<std::string>& ref,
                             const std::vector<std::string>& hyp);

struct ErrorBreakdown {
  double wer = 0.0;  // percents; wer = ins + del + sub
  double ins = 0.0;
  double del = 0.0;
  double sub = 0.0;
  size_t n_ref_words = 0;
};

// Corpus-level rates: total edit counts over total reference tokens, paired
// positionally. Empty reference corpora must have no errors.
ErrorBreakdown ComputeBreakdown(
    const std::vector<std::vector<std::string>>& refs,
    const std::vector<std::vector<std::string>>& hyps);

// Relative error reduction 100*(baseline - improved)/baseline; the baseline
// must be positive.
double Werr(double baseline_wer, double improved_wer);

// Tokenizations: whitespace-separated words, and characters with whitespace
// stripped.
std::vector<std::string> WordsOf(const std::string& text);
std::vector<std::string> CharsOf(const std::string& text);

struct CorpusScore {
  ErrorBreakdown word;  // WER and its breakdown
  ErrorBreakdown chr;   // CER on the same utterances
};

// Pairs ref and hyp utterances by utt_id; the id sets must match exactly.
// Order-invariant by construction (corpus-level totals).
CorpusScore ScoreCorpus(const std::vector<Transcript>& refs,
                        const std::vector<Transcript>& hyps);

// One human-readable line per the error display convention: error words
// uppercase, deletions as asterisks matching the missing word's length.
std::string RenderErrors(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp);

}  // namespace cidnst

#endif  // CIDNST_METRICS_HPP_
