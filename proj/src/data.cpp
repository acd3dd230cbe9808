// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/data.hpp"

#include "cidnst/bytes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

namespace cidnst {

namespace {

constexpr int kMaxCharset = 36;
constexpr uint32_t kFeatureVersion = 1;

using bytes::ByteReader;
using bytes::PutF64;
using bytes::PutU16;
using bytes::PutU32;
using bytes::ReadAll;
using bytes::WriteAll;

char SymbolAt(int i) {
  return i < 26 ? static_cast<char>('a' + i) : static_cast<char>('0' + (i - 26));
}

void CheckPlainField(const std::string& s, const char* what) {
  for (char c : s) {
    if (c == '\t' || c == '\n' || c == '\r') {
      Fail(ErrorKind::kFormat, std::string(what) + " contains tab or newline");
    }
  }
}

// Sentence with no immediately repeated character.
std::string DrawSentence(const SynthConfig& cfg, Rng* rng) {
  int len = cfg.min_len + rng->UniformInt(cfg.max_len - cfg.min_len + 1);
  std::string s;
  s.reserve(static_cast<size_t>(len));
  int prev = -1;
  for (int i = 0; i < len; i++) {
    int c;
    if (prev < 0) {
      c = rng->UniformInt(cfg.charset_size);
    } else {
      c = rng->UniformInt(cfg.charset_size - 1);
      if (c >= prev) c++;
    }
    s.push_back(SymbolAt(c));
    prev = c;
  }
  return s;
}

Utterance Synthesize(const std::string& utt_id, const std::string& text,
                     const Tensor& protos, const SynthConfig& cfg, Rng* rng) {
  int t = static_cast<int>(text.size()) * cfg.frames_per_char;
  Tensor frames({t, cfg.feat_dim});
  int row = 0;
  for (char ch : text) {
    int c = ch >= 'a' ? ch - 'a' : 26 + (ch - '0');
    for (int r = 0; r < cfg.frames_per_char; r++, row++) {
      for (int j = 0; j < cfg.feat_dim; j++) {
        double noise = cfg.noise_sigma == 0.0 ? 0.0 : cfg.noise_sigma * rng->Normal();
        frames.At(row, j) = protos.At(c, j) + noise;
      }
    }
  }
  return {utt_id, std::move(frames)};
}

std::string IndexedId(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04d", prefix, i);
  return buf;
}

}  // namespace

Tokenizer::Tokenizer(int charset_size) : charset_size_(charset_size) {
  if (charset_size < 1 || charset_size > kMaxCharset) {
    Fail(ErrorKind::kConfig, "tokenizer: charset size must be in [1," +
                                 std::to_string(kMaxCharset) + "]");
  }
}

std::vector<int> Tokenizer::Encode(const std::string& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char ch : text) {
    int sym = -1;
    if (ch >= 'a' && ch <= 'z') sym = ch - 'a';
    if (ch >= '0' && ch <= '9') sym = 26 + (ch - '0');
    ids.push_back(sym >= 0 && sym < charset_size_ ? kReserved + sym : kUnk);
  }
  return ids;
}

std::string Tokenizer::Decode(const std::vector<int>& body) const {
  std::string text;
  text.reserve(body.size());
  for (int id : body) {
    if (id == kUnk) {
      text.push_back('?');
    } else if (id >= kReserved && id < Vocab()) {
      text.push_back(CharFor(id));
    } else {
      Fail(ErrorKind::kVocab,
           "tokenizer: reserved or out-of-range id " + std::to_string(id) +
               " in token body");
    }
  }
  return text;
}

char Tokenizer::CharFor(int id) const {
  if (id < kReserved || id >= Vocab()) {
    Fail(ErrorKind::kVocab, "tokenizer: id " + std::to_string(id) +
                                " is not a charset token");
  }
  return SymbolAt(id - kReserved);
}

void SynthConfig::Validate() const {
  if (charset_size < 2 || charset_size > kMaxCharset) {
    Fail(ErrorKind::kConfig, "synth: charset_size must be in [2," +
                                 std::to_string(kMaxCharset) + "]");
  }
  if (min_len < 1 || max_len < min_len) {
    Fail(ErrorKind::kConfig, "synth: need 1 <= min_len <= max_len");
  }
  if (n_paired < 1 || n_unlabeled < 1 || n_external_text < 1 || n_dev < 1 ||
      n_test < 1) {
    Fail(ErrorKind::kConfig, "synth: all split counts must be >= 1");
  }
  if (frames_per_char < 1 || feat_dim < 1) {
    Fail(ErrorKind::kConfig, "synth: frames_per_char and feat_dim must be >= 1");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    Fail(ErrorKind::kConfig, "synth: noise_sigma must be finite and >= 0");
  }
}

Tensor CharPrototypes(const SynthConfig& cfg) {
  cfg.Validate();
  Rng rng(DeriveSeed(cfg.seed, "corpus/protos"));
  Tensor protos({cfg.charset_size, cfg.feat_dim});
  for (double& x : protos.Vec()) x = rng.Normal();
  for (int i = 0; i < cfg.charset_size; i++) {
    for (int j = i + 1; j < cfg.charset_size; j++) {
      double d2 = 0.0;
      for (int k = 0; k < cfg.feat_dim; k++) {
        double d = protos.At(i, k) - protos.At(j, k);
        d2 += d * d;
      }
      if (d2 < 1.0) {
        Fail(ErrorKind::kGeneration,
             "synth: prototypes closer than distance 1; raise feat_dim or "
             "change the seed");
      }
    }
  }
  return protos;
}

CorpusSplit SynthCorpus(const SynthConfig& cfg) {
  cfg.Validate();
  Tensor protos = CharPrototypes(cfg);
  CorpusSplit out;
  std::unordered_set<std::string> train_sentences;

  {
    Rng rng(DeriveSeed(cfg.seed, "corpus/paired"));
    for (int i = 0; i < cfg.n_paired; i++) {
      std::string text = DrawSentence(cfg, &rng);
      std::string id = IndexedId("train", i);
      train_sentences.insert(text);
      out.paired_x.push_back(Synthesize(id, text, protos, cfg, &rng));
      out.paired_y.push_back({id, text});
    }
  }
  {
    Rng rng(DeriveSeed(cfg.seed, "corpus/unlabeled"));
    for (int i = 0; i < cfg.n_unlabeled; i++) {
      std::string text = DrawSentence(cfg, &rng);
      train_sentences.insert(text);  // hidden truth still counts for hygiene
      out.unlabeled_x.push_back(
          Synthesize(IndexedId("unlab", i), text, protos, cfg, &rng));
    }
  }
  {
    Rng rng(DeriveSeed(cfg.seed, "corpus/external"));
    for (int i = 0; i < cfg.n_external_text; i++) {
      std::string text = DrawSentence(cfg, &rng);
      train_sentences.insert(text);
      out.external_text.push_back({IndexedId("text", i), text});
    }
  }

  auto draw_eval = [&](const char* prefix, int count, const char* tag,
                       std::vector<Utterance>* xs, std::vector<Transcript>* ys) {
    Rng rng(DeriveSeed(cfg.seed, tag));
    const int kRetries = 200;
    for (int i = 0; i < count; i++) {
      std::string text;
      bool ok = false;
      for (int r = 0; r < kRetries; r++) {
        text = DrawSentence(cfg, &rng);
        if (!train_sentences.count(text)) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        Fail(ErrorKind::kGeneration,
             "synth: cannot draw " + std::string(prefix) +
                 " sentences disjoint from training text; enlarge the "
                 "sentence space");
      }
      std::string id = IndexedId(prefix, i);
      xs->push_back(Synthesize(id, text, protos, cfg, &rng));
      ys->push_back({id, text});
    }
  };
  draw_eval("dev", cfg.n_dev, "corpus/dev", &out.dev_x, &out.dev_y);
  draw_eval("test", cfg.n_test, "corpus/test", &out.test_x, &out.test_y);

  CheckSplitInvariants(out);
  return out;
}

void CheckSplitInvariants(const CorpusSplit& c) {
  std::unordered_set<std::string> ids;
  auto add_ids = [&ids](const std::string& id) {
    if (!ids.insert(id).second) {
      Fail(ErrorKind::kConflict, "corpus: duplicate utt_id " + id);
    }
  };
  for (const auto& u : c.paired_x) add_ids(u.utt_id);
  for (const auto& u : c.unlabeled_x) add_ids(u.utt_id);
  for (const auto& t : c.external_text) add_ids(t.utt_id);
  for (const auto& u : c.dev_x) add_ids(u.utt_id);
  for (const auto& u : c.test_x) add_ids(u.utt_id);

  auto pair_check = [](const std::vector<Utterance>& xs,
                       const std::vector<Transcript>& ys, const char* split) {
    if (xs.size() != ys.size()) {
      Fail(ErrorKind::kConflict,
           std::string("corpus: ") + split + " features and transcripts differ in count");
    }
    for (size_t i = 0; i < xs.size(); i++) {
      if (xs[i].utt_id != ys[i].utt_id) {
        Fail(ErrorKind::kConflict, std::string("corpus: ") + split +
                                       " misaligned at " + xs[i].utt_id);
      }
    }
  };
  pair_check(c.paired_x, c.paired_y, "paired");
  pair_check(c.dev_x, c.dev_y, "dev");
  pair_check(c.test_x, c.test_y, "test");

  std::unordered_set<std::string> train_sentences;
  for (const auto& t : c.paired_y) train_sentences.insert(t.text);
  for (const auto& t : c.external_text) train_sentences.insert(t.text);
  for (const auto* eval : {&c.dev_y, &c.test_y}) {
    for (const auto& t : *eval) {
      if (train_sentences.count(t.text)) {
        Fail(ErrorKind::kConflict,
             "corpus: evaluation sentence also in training text: " + t.utt_id);
      }
    }
  }
}

void SaveFeatures(const std::string& path, const std::vector<Utterance>& utts) {
  std::string bytes;
  bytes += "CIDF";
  PutU32(&bytes, kFeatureVersion);
  for (const auto& u : utts) {
    if (u.frames.Rank() != 2 || u.frames.Dim(0) < 1 || u.frames.Dim(1) < 1) {
      Fail(ErrorKind::kShape, "features: " + u.utt_id + " must be [T>=1, F>=1]");
    }
    if (!u.frames.AllFinite()) {
      Fail(ErrorKind::kNumericFault, "features: non-finite values in " + u.utt_id);
    }
    if (u.utt_id.size() > 0xffff) {
      Fail(ErrorKind::kFormat, "features: utt_id too long");
    }
    PutU16(&bytes, static_cast<uint16_t>(u.utt_id.size()));
    bytes += u.utt_id;
    PutU32(&bytes, static_cast<uint32_t>(u.frames.Dim(0)));
    PutU32(&bytes, static_cast<uint32_t>(u.frames.Dim(1)));
    for (double v : u.frames.Vec()) PutF64(&bytes, v);
  }
  WriteAll(path, bytes);
}

std::vector<Utterance> LoadFeatures(const std::string& path) {
  ByteReader r(ReadAll(path), path);
  if (r.Str(4) != "CIDF") Fail(ErrorKind::kFormat, path + ": bad magic");
  uint32_t version = r.U32();
  if (version != kFeatureVersion) {
    Fail(ErrorKind::kFormat, path + ": unsupported version " + std::to_string(version));
  }
  std::vector<Utterance> utts;
  while (!r.AtEnd()) {
    Utterance u;
    u.utt_id = r.Str(r.U16());
    uint32_t t = r.U32();
    uint32_t f = r.U32();
    if (t < 1 || f < 1) {
      Fail(ErrorKind::kFormat, path + ": empty shape for " + u.utt_id);
    }
    Tensor frames({static_cast<int>(t), static_cast<int>(f)});
    for (double& v : frames.Vec()) v = r.F64();
    if (!frames.AllFinite()) {
      Fail(ErrorKind::kNumericFault, path + ": non-finite values in " + u.utt_id);
    }
    u.frames = std::move(frames);
    utts.push_back(std::move(u));
  }
  return utts;
}

void SaveTranscripts(const std::string& path, const std::vector<Transcript>& ts) {
  std::string bytes;
  for (const auto& t : ts) {
    CheckPlainField(t.utt_id, "transcript utt_id");
    CheckPlainField(t.text, "transcript text");
    bytes += t.utt_id;
    bytes += '\t';
    bytes += t.text;
    bytes += '\n';
  }
  WriteAll(path, bytes);
}

std::vector<Transcript> LoadTranscripts(const std::string& path) {
  std::string bytes = ReadAll(path);
  std::vector<Transcript> ts;
  size_t pos = 0;
  int line_no = 0;
  while (pos < bytes.size()) {
    size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) {
      Fail(ErrorKind::kFormat, path + ": missing final newline");
    }
    line_no++;
    std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      Fail(ErrorKind::kFormat,
           path + ": line " + std::to_string(line_no) + " is not utt_id<TAB>text");
    }
    ts.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return ts;
}

void SaveNBest(const std::string& path, const std::vector<NBestEntry>& entries) {
  std::string bytes;
  char num[64];
  for (const auto& e : entries) {
    CheckPlainField(e.utt_id, "n-best utt_id");
    CheckPlainField(e.text, "n-best text");
    std::snprintf(num, sizeof(num), "%d\t%.17g", e.rank, e.score);
    bytes += e.utt_id;
    bytes += '\t';
    bytes += num;
    bytes += '\t';
    bytes += e.text;
    bytes += '\n';
  }
  WriteAll(path, bytes);
}

std::vector<NBestEntry> LoadNBest(const std::string& path) {
  std::string bytes = ReadAll(path);
  std::vector<NBestEntry> entries;
  size_t pos = 0;
  int line_no = 0;
  while (pos < bytes.size()) {
    size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) {
      Fail(ErrorKind::kFormat, path + ": missing final newline");
    }
    line_no++;
    std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    std::vector<std::string> fields;
    size_t start = 0;
    for (int i = 0; i < 3; i++) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        Fail(ErrorKind::kFormat,
             path + ": line " + std::to_string(line_no) + " needs 4 fields");
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fields.push_back(line.substr(start));
    NBestEntry e;
    e.utt_id = fields[0];
    try {
      size_t used = 0;
      e.rank = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("rank");
      e.score = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      Fail(ErrorKind::kFormat,
           path + ": line " + std::to_string(line_no) + " has a bad number");
    }
    e.text = fields[3];
    entries.push_back(std::move(e));
  }
  return entries;
}

void SaveCorpus(const std::string& dir, const CorpusSplit& c,
                const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create directory " + dir);

  auto at = [&dir](const char* name) { return (fs::path(dir) / name).string(); };
  SaveFeatures(at("paired.cidf"), c.paired_x);
  SaveTranscripts(at("paired.tsv"), c.paired_y);
  SaveFeatures(at("unlabeled.cidf"), c.unlabeled_x);
  SaveTranscripts(at("external_text.tsv"), c.external_text);
  SaveFeatures(at("dev.cidf"), c.dev_x);
  SaveTranscripts(at("dev.tsv"), c.dev_y);
  SaveFeatures(at("test.cidf"), c.test_x);
  SaveTranscripts(at("test.tsv"), c.test_y);

  nlohmann::ordered_json j;
  j["format"] = "cidnst-corpus";
  j["version"] = 1;
  j["seed"] = cfg.seed;
  j["charset_size"] = cfg.charset_size;
  j["files"] = {
      {"paired_features", "paired.cidf"},
      {"paired_transcripts", "paired.tsv"},
      {"unlabeled_features", "unlabeled.cidf"},
      {"external_text", "external_text.tsv"},
      {"dev_features", "dev.cidf"},
      {"dev_transcripts", "dev.tsv"},
      {"test_features", "test.cidf"},
      {"test_transcripts", "test.tsv"},
  };
  WriteAll(at("manifest.json"), j.dump(2) + "\n");
}

LoadedCorpus LoadCorpus(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadAll(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, manifest_path + ": " + e.what());
  }
  const std::vector<std::string> allowed = {"format", "version", "seed",
                                            "charset_size", "files"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      Fail(ErrorKind::kFormat, manifest_path + ": unknown key " + it.key());
    }
  }
  for (const auto& key : allowed) {
    if (!j.contains(key)) {
      Fail(ErrorKind::kFormat, manifest_path + ": missing key " + key);
    }
  }
  if (j["format"] != "cidnst-corpus" || j["version"] != 1) {
    Fail(ErrorKind::kFormat, manifest_path + ": not a version-1 corpus manifest");
  }
  fs::path base = fs::path(manifest_path).parent_path();
  auto at = [&](const char* key) {
    if (!j["files"].contains(key)) {
      Fail(ErrorKind::kFormat, manifest_path + ": files." + key + " missing");
    }
    return (base / j["files"][key].get<std::string>()).string();
  };
  LoadedCorpus out;
  out.seed = j["seed"].get<uint64_t>();
  out.charset_size = j["charset_size"].get<int>();
  out.split.paired_x = LoadFeatures(at("paired_features"));
  out.split.paired_y = LoadTranscripts(at("paired_transcripts"));
  out.split.unlabeled_x = LoadFeatures(at("unlabeled_features"));
  out.split.external_text = LoadTranscripts(at("external_text"));
  out.split.dev_x = LoadFeatures(at("dev_features"));
  out.split.dev_y = LoadTranscripts(at("dev_transcripts"));
  out.split.test_x = LoadFeatures(at("test_features"));
  out.split.test_y = LoadTranscripts(at("test_transcripts"));
  CheckSplitInvariants(out.split);
  return out;
}

}  // namespace cidnst
