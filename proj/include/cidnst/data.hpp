// cidnst/data.hpp  Synthetic speech-like corpus, char tokenization, splits,
// and bit-exact file formats.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_DATA_HPP_
#define CIDNST_DATA_HPP_

#include <string>
#include <vector>

#include "cidnst/tensor.hpp"

namespace cidnst {

// Char-level tokenizer over the first `charset_size` symbols of
// 'a'..'z','0'..'9', with reserved ids pad=0, sos=1, eos=2, unk=3 ahead of
// the charset. The CTC blank sits one past the vocabulary (id Vocab()).
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  explicit Tokenizer(int charset_size);

  int Vocab() const { return kReserved + charset_size_; }
  int Blank() const { return Vocab(); }
  int CharsetSize() const { return charset_size_; }

  // Body ids only (no sos/eos). Unknown characters map to unk.
  std::vector<int> Encode(const std::string& text) const;
  // Inverse on charset ids; unk renders as '?'. Reserved ids other than unk
  // in the body are an ingest error.
  std::string Decode(const std::vector<int>& body) const;

  char CharFor(int id) const;  // id must be a charset id

 private:
  int charset_size_;
};

struct Utterance {
  std::string utt_id;
  Tensor frames;  // [T, F]
};

struct Transcript {
  std::string utt_id;
  std::string text;
};

struct NBestEntry {
  std::string utt_id;
  int rank = 0;
  double score = 0.0;
  std::string text;
};

// S = {paired}, U = {unlabeled speech, external text}, plus dev/test.
// paired_x[i] corresponds to paired_y[i], and likewise for dev/test.
struct CorpusSplit {
  std::vector<Utterance> paired_x;
  std::vector<Transcript> paired_y;
  std::vector<Utterance> unlabeled_x;
  std::vector<Transcript> external_text;
  std::vector<Utterance> dev_x;
  std::vector<Transcript> dev_y;
  std::vector<Utterance> test_x;
  std::vector<Transcript> test_y;
};

struct SynthConfig {
  int charset_size = 20;
  int min_len = 3;          // sentence length range, characters
  int max_len = 12;
  int n_paired = 200;
  int n_unlabeled = 300;    // unlabeled speech X'
  int n_external_text = 2000;  // external text Y'
  int n_dev = 100;
  int n_test = 200;
  int frames_per_char = 4;
  int feat_dim = 16;
  double noise_sigma = 0.1;
  uint64_t seed = 0;

  void Validate() const;
};

// Seeded per-character feature prototypes, [charset_size, feat_dim]. The
// same config always yields the same prototypes; generation fails if any
// pair of prototypes is closer than Euclidean distance 1 (the corpus must
// stay separable).
Tensor CharPrototypes(const SynthConfig& cfg);

// Deterministic synthetic corpus: every utterance is a sentence whose
// characters' prototypes are repeated frames_per_char times with Gaussian
// noise of noise_sigma. Sentences never repeat a character twice in a row,
// so every transcript admits a CTC alignment whenever the subsampled frame
// count reaches the transcript length. Dev/test sentences are disjoint from
// every training-side sentence (paired, unlabeled truth, external text);
// failure to satisfy that within the retry budget is a generation error.
CorpusSplit SynthCorpus(const SynthConfig& cfg);

// Split hygiene: utt_ids unique across all splits; no train-side transcript
// sentence reappears in dev or test. Violations are conflict errors.
void CheckSplitInvariants(const CorpusSplit& c);

// Binary feature file: magic "CIDF", u32 version, then per utterance
// u16 id length, UTF-8 id, u32 T, u32 F, T*F little-endian f64. Utterance
// order is preserved; round-trips are byte-exact.
void SaveFeatures(const std::string& path, const std::vector<Utterance>& utts);
std::vector<Utterance> LoadFeatures(const std::string& path);

// Transcript file: UTF-8 lines "utt_id<TAB>text".
void SaveTranscripts(const std::string& path, const std::vector<Transcript>& ts);
std::vector<Transcript> LoadTranscripts(const std::string& path);

// N-best file: lines "utt_id<TAB>rank<TAB>score<TAB>text"; scores printed
// with 17 significant digits so parsing returns the identical double.
void SaveNBest(const std::string& path, const std::vector<NBestEntry>& entries);
std::vector<NBestEntry> LoadNBest(const std::string& path);

// Writes all split files plus manifest.json into dir. The manifest records
// the generation seed, charset size, and relative file paths.
void SaveCorpus(const std::string& dir, const CorpusSplit& c,
                const SynthConfig& cfg);

struct LoadedCorpus {
  CorpusSplit split;
  uint64_t seed = 0;
  int charset_size = 0;
};

// Loads a corpus by manifest path and re-checks the split invariants.
// Unknown manifest keys are rejected.
LoadedCorpus LoadCorpus(const std::string& manifest_path);

}  // namespace cidnst

#endif  // CIDNST_DATA_HPP_
