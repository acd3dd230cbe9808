// cidnst/model.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/model.hpp"

#include <cmath>
#include <cstring>

#include "cidnst/common.hpp"
#include "cidnst/data.hpp"
#include "cidnst/nn.hpp"
#include "json.hpp"

namespace cidnst {
namespace {

// Bidirectional layer over [L, in] -> [L, 2K]; forward and backward halves
// are concatenated per step.
Var BiLstm(const Var& input, const LstmParams& fw, const LstmParams& bw) {
  int rows = input->value.Dim(0);
  std::vector<Var> fh(rows), bh(rows);
  Var h = Constant(Tensor({1, fw.units}));
  Var c = Constant(Tensor({1, fw.units}));
  for (int t = 0; t < rows; t++) {
    LstmGraphStep(fw, SliceRows(input, t, t + 1), &h, &c);
    fh[t] = h;
  }
  h = Constant(Tensor({1, bw.units}));
  c = Constant(Tensor({1, bw.units}));
  for (int t = rows - 1; t >= 0; t--) {
    LstmGraphStep(bw, SliceRows(input, t, t + 1), &h, &c);
    bh[t] = h;
  }
  std::vector<Var> steps(rows);
  for (int t = 0; t < rows; t++) steps[t] = Concat(fh[t], bh[t], 1);
  return StackRows(steps);
}

}  // namespace

void ModelConfig::Validate() const {
  if (feat_dim < 1) Fail(ErrorKind::kConfig, "model.feat_dim: must be >= 1");
  if (hidden < 2 || hidden % 2 != 0) {
    Fail(ErrorKind::kConfig, "model.hidden: must be even and >= 2");
  }
  if (vocab <= Tokenizer::kReserved) {
    Fail(ErrorKind::kConfig, "model.vocab: must exceed the reserved ids");
  }
  if (subsample < 1) Fail(ErrorKind::kConfig, "model.subsample: must be >= 1");
  if (dec_hidden < 1) Fail(ErrorKind::kConfig, "model.dec_hidden: must be >= 1");
}

std::string ModelConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["feat_dim"] = feat_dim;
  j["hidden"] = hidden;
  j["vocab"] = vocab;
  j["subsample"] = subsample;
  j["dec_hidden"] = dec_hidden;
  return j.dump();
}

ModelConfig ModelConfig::FromJson(const std::string& json) {
  nlohmann::json j = nlohmann::json::parse(json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    Fail(ErrorKind::kFormat, "model config: not a JSON object");
  }
  const char* keys[] = {"feat_dim", "hidden", "vocab", "subsample",
                        "dec_hidden"};
  for (auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) Fail(ErrorKind::kFormat, "model config: unknown key " + key);
  }
  ModelConfig cfg;
  try {
    cfg.feat_dim = j.at("feat_dim").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.vocab = j.at("vocab").get<int>();
    cfg.subsample = j.at("subsample").get<int>();
    cfg.dec_hidden = j.at("dec_hidden").get<int>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("model config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

namespace {

std::vector<ParamSpec> SpecsFor(const ModelConfig& cfg) {
  int f = cfg.feat_dim, h = cfg.hidden, v = cfg.vocab, r = cfg.subsample;
  int k = h / 2, d = cfg.dec_hidden, a = h;
  std::vector<ParamSpec> specs;
  specs.push_back({"frontend.conv.w", r * f, h, ParamSpec::kWeight});
  specs.push_back({"frontend.conv.b", 1, h, ParamSpec::kBias});
  for (const char* layer : {"frontend", "embed", "shared"}) {
    for (const char* dir : {"fw", "bw"}) {
      std::string p = std::string(layer) + "." + dir;
      specs.push_back({p + ".wx", h, 4 * k, ParamSpec::kWeight});
      specs.push_back({p + ".wh", k, 4 * k, ParamSpec::kWeight});
      specs.push_back({p + ".b", 1, 4 * k, ParamSpec::kLstmBias});
    }
  }
  specs.push_back({"embed.table", v, h, ParamSpec::kWeight});
  specs.push_back({"dec.emb", v, h, ParamSpec::kWeight});
  specs.push_back({"dec.att.wq", d, a, ParamSpec::kWeight});
  specs.push_back({"dec.att.wk", h, a, ParamSpec::kWeight});
  specs.push_back({"dec.att.b", 1, a, ParamSpec::kBias});
  specs.push_back({"dec.att.v", a, 1, ParamSpec::kWeight});
  specs.push_back({"dec.lstm.wx", 2 * h, 4 * d, ParamSpec::kWeight});
  specs.push_back({"dec.lstm.wh", d, 4 * d, ParamSpec::kWeight});
  specs.push_back({"dec.lstm.b", 1, 4 * d, ParamSpec::kLstmBias});
  specs.push_back({"dec.out.w", d + h, v, ParamSpec::kWeight});
  specs.push_back({"dec.out.b", 1, v, ParamSpec::kBias});
  specs.push_back({"ctc.w", h, v + 1, ParamSpec::kWeight});
  specs.push_back({"ctc.b", 1, v + 1, ParamSpec::kBias});
  return specs;
}

}  // namespace

Model Model::Init(const ModelConfig& cfg, uint64_t seed) {
  cfg.Validate();
  Model m;
  m.cfg_ = cfg;
  m.params_ = InitParams(SpecsFor(cfg), seed);
  return m;
}

Model Model::Shaped(const ModelConfig& cfg) {
  cfg.Validate();
  Model m;
  m.cfg_ = cfg;
  m.params_ = ShapedParams(SpecsFor(cfg));
  return m;
}

Model Model::FromParams(const ModelConfig& cfg,
                        std::map<std::string, Var> params) {
  cfg.Validate();
  ValidateParams(SpecsFor(cfg), params, "model");
  Model m;
  m.cfg_ = cfg;
  m.params_ = std::move(params);
  return m;
}

const Var& Model::P(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    Fail(ErrorKind::kConfig, "model: unknown parameter " + name);
  }
  return it->second;
}

std::map<std::string, Tensor> Model::StateDict() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, var] : params_) out.emplace(name, var->value);
  return out;
}

void Model::LoadState(const std::map<std::string, Tensor>& state) {
  if (state.size() != params_.size()) {
    Fail(ErrorKind::kFormat, "model state: parameter count mismatch");
  }
  for (auto& [name, var] : params_) {
    auto it = state.find(name);
    if (it == state.end()) {
      Fail(ErrorKind::kFormat, "model state: missing parameter " + name);
    }
    if (!it->second.SameShape(var->value)) {
      Fail(ErrorKind::kFormat, "model state: shape mismatch for " + name +
                                   " (" + it->second.ShapeStr() + " vs " +
                                   var->value.ShapeStr() + ")");
    }
    var->value = it->second;
  }
}

Var Model::Frontend(const Tensor& x) const {
  if (x.Rank() != 2 || x.Dim(1) != cfg_.feat_dim) {
    Fail(ErrorKind::kShape, "frontend: want [T," +
                                std::to_string(cfg_.feat_dim) + "], got " +
                                x.ShapeStr());
  }
  int t = x.Dim(0), r = cfg_.subsample;
  if (t < r) {
    Fail(ErrorKind::kTooShortInput,
         "frontend: " + std::to_string(t) + " frames, need at least " +
             std::to_string(r));
  }
  int out_len = (t + r - 1) / r;
  Var xp = PadRows(Constant(x), out_len * r);
  std::vector<Var> windows(out_len);
  for (int i = 0; i < out_len; i++) {
    windows[i] =
        Reshape(SliceRows(xp, i * r, (i + 1) * r), {1, r * cfg_.feat_dim});
  }
  Var conv = Tanh(AddRowVec(
      MatMul(StackRows(windows), P("frontend.conv.w")), P("frontend.conv.b")));
  return BiLstm(conv, FindLstm(params_, "frontend.fw"),
                FindLstm(params_, "frontend.bw"));
}

Var Model::EmbedText(const std::vector<int>& ids) const {
  if (ids.empty()) Fail(ErrorKind::kEmptyBatch, "embed: empty sequence");
  Var emb = Embedding(P("embed.table"), ids);
  return BiLstm(emb, FindLstm(params_, "embed.fw"),
                FindLstm(params_, "embed.bw"));
}

Var Model::SharedEncode(const Var& b) const {
  if (b->value.Rank() != 2 || b->value.Dim(1) != cfg_.hidden) {
    Fail(ErrorKind::kShape, "shared_encode: want [L," +
                                std::to_string(cfg_.hidden) + "], got " +
                                b->value.ShapeStr());
  }
  if (b->value.Dim(0) < 1) {
    Fail(ErrorKind::kEmptyBatch, "shared_encode: empty sequence");
  }
  return BiLstm(b, FindLstm(params_, "shared.fw"), FindLstm(params_, "shared.bw"));
}

Var Model::EncodeSpeech(const Tensor& x) const {
  return SharedEncode(Frontend(x));
}

Var Model::EncodeText(const std::vector<int>& ids) const {
  return SharedEncode(EmbedText(ids));
}

Var Model::TeacherForced(const Var& enc,
                         const std::vector<int>& y_with_eos) const {
  const Tensor& e = enc->value;
  if (e.Rank() != 2 || e.Dim(1) != cfg_.hidden) {
    Fail(ErrorKind::kShape, "teacher_forced: encoder output must be [L," +
                                std::to_string(cfg_.hidden) + "], got " +
                                e.ShapeStr());
  }
  if (e.Dim(0) < 1) {
    Fail(ErrorKind::kEmptyBatch, "teacher_forced: empty encoder output");
  }
  if (y_with_eos.empty() || y_with_eos.back() != Tokenizer::kEos) {
    Fail(ErrorKind::kFormat, "teacher_forced: target must end with eos");
  }
  int n = static_cast<int>(y_with_eos.size());
  std::vector<int> prev(n);
  prev[0] = Tokenizer::kSos;
  for (int i = 1; i < n; i++) prev[i] = y_with_eos[i - 1];

  Var emb = Embedding(P("dec.emb"), prev);
  Var keys = AddRowVec(MatMul(enc, P("dec.att.wk")), P("dec.att.b"));
  LstmParams dec = FindLstm(params_, "dec.lstm");
  Var h = Constant(Tensor({1, cfg_.dec_hidden}));
  Var c = Constant(Tensor({1, cfg_.dec_hidden}));
  std::vector<Var> out_rows(n);
  for (int t = 0; t < n; t++) {
    Var query = MatMul(h, P("dec.att.wq"));
    Var scores = MatMul(Tanh(AddRowVec(keys, query)), P("dec.att.v"));
    Var alpha = SoftmaxRows(Transpose(scores));
    Var ctx = MatMul(alpha, enc);
    Var x = Concat(SliceRows(emb, t, t + 1), ctx, 1);
    LstmGraphStep(dec, x, &h, &c);
    out_rows[t] =
        AddRowVec(MatMul(Concat(h, ctx, 1), P("dec.out.w")), P("dec.out.b"));
  }
  return LogSoftmaxRows(StackRows(out_rows));
}

Var Model::CtcLogProbs(const Var& enc) const {
  const Tensor& e = enc->value;
  if (e.Rank() != 2 || e.Dim(1) != cfg_.hidden) {
    Fail(ErrorKind::kShape, "ctc_log_probs: encoder output must be [L," +
                                std::to_string(cfg_.hidden) + "], got " +
                                e.ShapeStr());
  }
  return LogSoftmaxRows(AddRowVec(MatMul(enc, P("ctc.w")), P("ctc.b")));
}

Model::DecCache Model::MakeDecCache(const Tensor& enc_values) const {
  if (enc_values.Rank() != 2 || enc_values.Dim(1) != cfg_.hidden) {
    Fail(ErrorKind::kShape, "dec_cache: encoder output must be [L," +
                                std::to_string(cfg_.hidden) + "], got " +
                                enc_values.ShapeStr());
  }
  if (enc_values.Dim(0) < 1) {
    Fail(ErrorKind::kEmptyBatch, "dec_cache: empty encoder output");
  }
  const Tensor& wk = P("dec.att.wk")->value;
  const Tensor& b = P("dec.att.b")->value;
  int rows = enc_values.Dim(0), a = wk.Dim(1);
  Tensor keys({rows, a});
  for (int i = 0; i < rows; i++) {
    double* row = keys.Data() + static_cast<size_t>(i) * a;
    AccumMatVec(enc_values.Data() + static_cast<size_t>(i) * cfg_.hidden, wk,
                row);
    for (int j = 0; j < a; j++) row[j] += b.At(0, j);
  }
  return DecCache{enc_values, std::move(keys)};
}

Model::DecState Model::InitialDecState() const {
  DecState s;
  s.h.assign(cfg_.dec_hidden, 0.0);
  s.c.assign(cfg_.dec_hidden, 0.0);
  return s;
}

std::vector<double> Model::StepLogProbs(const DecCache& cache, DecState* state,
                                        int prev_token) const {
  int v = cfg_.vocab, h = cfg_.hidden, d = cfg_.dec_hidden, a = h;
  if (prev_token < 0 || prev_token >= v) {
    Fail(ErrorKind::kVocab,
         "decode: previous token " + std::to_string(prev_token) +
             " out of vocabulary of size " + std::to_string(v));
  }
  int rows = cache.enc.Dim(0);
  const Tensor& att_v = P("dec.att.v")->value;

  std::vector<double> query(a, 0.0);
  AccumMatVec(state->h.data(), P("dec.att.wq")->value, query.data());
  std::vector<double> scores(rows);
  for (int j = 0; j < rows; j++) {
    const double* krow = cache.keys.Data() + static_cast<size_t>(j) * a;
    double s = 0.0;
    for (int i = 0; i < a; i++) {
      s += std::tanh(krow[i] + query[i]) * att_v.At(static_cast<size_t>(i));
    }
    scores[j] = s;
  }
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double z = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    z += s;
  }
  std::vector<double> ctx(h, 0.0);
  for (int j = 0; j < rows; j++) {
    double w = scores[j] / z;
    const double* erow = cache.enc.Data() + static_cast<size_t>(j) * h;
    for (int i = 0; i < h; i++) ctx[i] += w * erow[i];
  }

  std::vector<double> x(2 * h);
  const Tensor& emb = P("dec.emb")->value;
  std::memcpy(x.data(), emb.Data() + static_cast<size_t>(prev_token) * h,
              sizeof(double) * h);
  std::memcpy(x.data() + h, ctx.data(), sizeof(double) * h);
  LstmValueStep(FindLstm(params_, "dec.lstm"), x.data(), &state->h,
                &state->c);

  std::vector<double> cat(d + h);
  std::memcpy(cat.data(), state->h.data(), sizeof(double) * d);
  std::memcpy(cat.data() + d, ctx.data(), sizeof(double) * h);
  std::vector<double> logits(P("dec.out.b")->value.Vec());
  AccumMatVec(cat.data(), P("dec.out.w")->value, logits.data());

  double lmx = logits[0];
  for (double l : logits) lmx = std::max(lmx, l);
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - lmx);
  lse = lmx + std::log(lse);
  for (double& l : logits) l -= lse;
  return logits;
}

}  // namespace cidnst
