// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cidnst/checkpoint.hpp"
#include "cidnst/common.hpp"
#include "cidnst/data.hpp"
#include "cidnst/model.hpp"
#include "doctest.h"

using namespace cidnst;

namespace {

ModelConfig SmallConfig() {
  ModelConfig cfg;
  cfg.feat_dim = 4;
  cfg.hidden = 8;
  cfg.vocab = Tokenizer(4).Vocab();  // 8
  cfg.subsample = 4;
  cfg.dec_hidden = 8;
  return cfg;
}

Tensor RandomFrames(int t, int f, uint64_t seed) {
  Rng rng(seed);
  Tensor x({t, f});
  for (double& v : x.Vec()) v = rng.Normal();
  return x;
}

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;  // sentinel: "did not throw"
}

std::string TmpPath(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config validation rejects bad widths at construction") {
  ModelConfig cfg = SmallConfig();
  cfg.hidden = 7;
  CHECK(KindOf([&] { Model::Init(cfg, 1); }) == ErrorKind::kConfig);
  cfg = SmallConfig();
  cfg.vocab = Tokenizer::kReserved;  // no room for any character
  CHECK(KindOf([&] { Model::Init(cfg, 1); }) == ErrorKind::kConfig);
  cfg = SmallConfig();
  cfg.subsample = 0;
  CHECK(KindOf([&] { Model::Init(cfg, 1); }) == ErrorKind::kConfig);
}

TEST_CASE("frontend subsamples by ceil(T/r) and checks inputs") {
  ModelConfig dflt;  // defaults except the pinned width below
  dflt.hidden = 32;  // the frontend's output width is exactly H
  dflt.subsample = 4;
  dflt.vocab = Tokenizer(20).Vocab();
  Model m = Model::Init(dflt, 7);
  Var out = m.Frontend(RandomFrames(8, 16, 2));
  CHECK(out->value.Dim(0) == 2);
  CHECK(out->value.Dim(1) == 32);
  CHECK(m.Frontend(RandomFrames(7, 16, 2))->value.Dim(0) == 2);
  CHECK(m.Frontend(RandomFrames(9, 16, 2))->value.Dim(0) == 3);
  CHECK(m.Frontend(RandomFrames(4, 16, 2))->value.Dim(0) == 1);

  CHECK(KindOf([&] { m.Frontend(RandomFrames(3, 16, 2)); }) ==
        ErrorKind::kTooShortInput);
  CHECK(KindOf([&] { m.Frontend(RandomFrames(8, 5, 2)); }) ==
        ErrorKind::kShape);
}

TEST_CASE("embed_text rejects empty and out-of-vocabulary sequences") {
  Model m = Model::Init(SmallConfig(), 3);
  CHECK(KindOf([&] { m.EmbedText({}); }) == ErrorKind::kEmptyBatch);
  CHECK(KindOf([&] { m.EmbedText({4, m.Config().vocab}); }) ==
        ErrorKind::kVocab);
  Var out = m.EmbedText({4, 5, 6});
  CHECK(out->value.Dim(0) == 3);
  CHECK(out->value.Dim(1) == m.Config().hidden);
}

TEST_CASE("shared encoder preserves length and width") {
  Model m = Model::Init(SmallConfig(), 11);
  for (int len = 1; len <= 32; len++) {
    Rng rng(100 + len);
    Tensor b({len, m.Config().hidden});
    for (double& v : b.Vec()) v = rng.Normal();
    Var out = m.SharedEncode(Constant(b));
    CHECK(out->value.Dim(0) == len);
    CHECK(out->value.Dim(1) == m.Config().hidden);
  }
  CHECK(KindOf([&] {
          m.SharedEncode(Constant(Tensor({2, m.Config().hidden + 1})));
        }) == ErrorKind::kShape);
  CHECK(KindOf([&] {
          m.SharedEncode(Constant(Tensor({0, m.Config().hidden})));
        }) == ErrorKind::kEmptyBatch);
}

TEST_CASE("teacher-forced rows are log-distributions and need trailing eos") {
  Model m = Model::Init(SmallConfig(), 5);
  Var enc = m.EncodeSpeech(RandomFrames(12, 4, 9));
  std::vector<int> y = {4, 6, 5, Tokenizer::kEos};
  Var lp = m.TeacherForced(enc, y);
  CHECK(lp->value.Dim(0) == 4);
  CHECK(lp->value.Dim(1) == m.Config().vocab);
  for (int t = 0; t < lp->value.Dim(0); t++) {
    double lse = -INFINITY;
    for (int k = 0; k < lp->value.Dim(1); k++) {
      double v = lp->value.At(t, k);
      lse = std::max(lse, v) + std::log1p(std::exp(-std::fabs(lse - v)));
    }
    CHECK(std::fabs(lse) <= 1e-9);
  }
  CHECK(KindOf([&] { m.TeacherForced(enc, {4, 6, 5}); }) ==
        ErrorKind::kFormat);
  CHECK(KindOf([&] { m.TeacherForced(enc, {}); }) == ErrorKind::kFormat);
  CHECK(KindOf([&] {
          m.TeacherForced(Constant(Tensor({0, m.Config().hidden})), y);
        }) == ErrorKind::kEmptyBatch);
}

TEST_CASE("ctc head emits per-frame log-distributions over V+1 classes") {
  Model m = Model::Init(SmallConfig(), 6);
  Var enc = m.EncodeSpeech(RandomFrames(10, 4, 1));
  Var lp = m.CtcLogProbs(enc);
  CHECK(lp->value.Dim(0) == enc->value.Dim(0));
  CHECK(lp->value.Dim(1) == m.Config().vocab + 1);
  for (int t = 0; t < lp->value.Dim(0); t++) {
    double sum = 0.0;
    for (int k = 0; k < lp->value.Dim(1); k++) {
      sum += std::exp(lp->value.At(t, k));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("initialization is seed-deterministic") {
  Model a = Model::Init(SmallConfig(), 42);
  Model b = Model::Init(SmallConfig(), 42);
  Model c = Model::Init(SmallConfig(), 43);
  bool same = true, differ = false;
  for (const auto& [name, var] : a.Params()) {
    const Tensor& tb = b.P(name)->value;
    const Tensor& tc = c.P(name)->value;
    for (size_t i = 0; i < var->value.Numel(); i++) {
      same = same && var->value.At(i) == tb.At(i);
      differ = differ || var->value.At(i) != tc.At(i);
    }
  }
  CHECK(same);
  CHECK(differ);
  // Forget-gate bias opens memory at init.
  const Tensor& bias = a.P("shared.fw.b")->value;
  int k = bias.Dim(1) / 4;
  CHECK(bias.At(0, 0) == 0.0);
  CHECK(bias.At(0, k) == 1.0);
}

TEST_CASE("incremental decode matches the teacher-forced graph") {
  Model m = Model::Init(SmallConfig(), 21);
  Tensor x = RandomFrames(16, 4, 33);
  Var enc = m.EncodeSpeech(x);
  std::vector<int> y = {4, 5, 7, 6, 4, Tokenizer::kEos};
  Var lp = m.TeacherForced(enc, y);

  Model::DecCache cache = m.MakeDecCache(enc->value);
  Model::DecState st = m.InitialDecState();
  int prev = Tokenizer::kSos;
  for (size_t t = 0; t < y.size(); t++) {
    std::vector<double> row = m.StepLogProbs(cache, &st, prev);
    for (int k = 0; k < m.Config().vocab; k++) {
      CHECK(row[k] == doctest::Approx(lp->value.At(t, k)).epsilon(1e-9));
    }
    prev = y[t];
  }
}

TEST_CASE("speech-path loss reaches front-end parameters") {
  Model m = Model::Init(SmallConfig(), 17);
  Var enc = m.EncodeSpeech(RandomFrames(8, 4, 3));
  Var loss = MeanAll(m.TeacherForced(enc, {4, Tokenizer::kEos}));
  Backward(loss);
  CHECK(m.P("frontend.conv.w")->HasGrad());
  CHECK(m.P("dec.out.w")->HasGrad());
  CHECK(m.P("shared.fw.wx")->HasGrad());
  CHECK_FALSE(m.P("embed.table")->HasGrad());  // text side untouched
  double sum = 0.0;
  for (double g : m.P("frontend.conv.w")->grad.Vec()) sum += std::fabs(g);
  CHECK(sum > 0.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Model m = Model::Init(SmallConfig(), 99);
  std::string path = TmpPath("cidnst_model_ckpt.bin");
  SaveModel(path, m);
  Model r = LoadModel(path);
  CHECK(r.Config().hidden == m.Config().hidden);
  CHECK(r.Config().vocab == m.Config().vocab);
  for (const auto& [name, var] : m.Params()) {
    const Tensor& t = r.P(name)->value;
    REQUIRE(t.SameShape(var->value));
    for (size_t i = 0; i < t.Numel(); i++) CHECK(t.At(i) == var->value.At(i));
  }
  // Re-save of the loaded model reproduces the file byte for byte.
  std::string path2 = TmpPath("cidnst_model_ckpt2.bin");
  SaveModel(path2, r);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK(!b1.empty());
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects corruption") {
  Model m = Model::Init(SmallConfig(), 1);
  std::string path = TmpPath("cidnst_model_bad.bin");
  SaveModel(path, m);
  std::string bytes = [&] {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), {});
  }();

  std::string truncated = bytes.substr(0, bytes.size() - 3);
  std::ofstream(path, std::ios::binary) << truncated;
  CHECK(KindOf([&] { LoadModel(path); }) == ErrorKind::kFormat);

  std::string wrong = bytes;
  wrong[0] = 'X';
  std::ofstream(path, std::ios::binary) << wrong;
  CHECK(KindOf([&] { LoadModel(path); }) == ErrorKind::kFormat);

  std::remove(path.c_str());
  CHECK(KindOf([&] { LoadModel(path); }) == ErrorKind::kIo);
}
