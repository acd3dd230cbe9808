// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>
#include <cmath>

#include "cidnst/common.hpp"
#include "cidnst/metrics.hpp"
#include "doctest.h"

using namespace cidnst;

namespace {

using Tokens = std::vector<std::string>;

// Independent quadratic DP, values only, for the cost oracle.
int EditDistance(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<int>> d(a.size() + 1,
                                  std::vector<int>(b.size() + 1, 0));
  for (size_t i = 0; i <= a.size(); i++) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= b.size(); j++) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); i++) {
    for (size_t j = 1; j <= b.size(); j++) {
      d[i][j] = std::min({d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1),
                          d[i][j - 1] + 1, d[i - 1][j] + 1});
    }
  }
  return d[a.size()][b.size()];
}

int ScriptCost(const std::vector<AlignStep>& script) {
  int c = 0;
  for (const AlignStep& s : script) c += s.op != EditOp::kMatch;
  return c;
}

// Applying the script to ref must yield hyp exactly.
Tokens ApplyScript(const Tokens& ref, const Tokens& hyp,
                   const std::vector<AlignStep>& script) {
  Tokens out;
  for (const AlignStep& s : script) {
    switch (s.op) {
      case EditOp::kMatch:
        out.push_back(ref[s.ref_idx]);
        break;
      case EditOp::kSub:
      case EditOp::kIns:
        out.push_back(hyp[s.hyp_idx]);
        break;
      case EditOp::kDel:
        break;
    }
  }
  return out;
}

Tokens RandomTokens(Rng* rng, int max_len) {
  static const char* kWords[] = {"a", "b", "c", "d", "e"};
  Tokens t(rng->UniformInt(static_cast<uint64_t>(max_len) + 1));
  for (auto& w : t) w = kWords[rng->UniformInt(5)];
  return t;
}

}  // namespace

TEST_CASE("align fixtures") {
  auto same = Align({"a", "b", "c"}, {"a", "b", "c"});
  CHECK(same.size() == 3);
  CHECK(ScriptCost(same) == 0);

  auto one_sub = Align({"der", "anspruch", "ist"}, {"der", "spruch", "ist"});
  REQUIRE(one_sub.size() == 3);
  CHECK(one_sub[0].op == EditOp::kMatch);
  CHECK(one_sub[1].op == EditOp::kSub);
  CHECK(one_sub[2].op == EditOp::kMatch);

  auto one_ins = Align({}, {"x"});
  REQUIRE(one_ins.size() == 1);
  CHECK(one_ins[0].op == EditOp::kIns);
  CHECK(one_ins[0].hyp_idx == 0);

  auto one_del = Align({"x"}, {});
  REQUIRE(one_del.size() == 1);
  CHECK(one_del[0].op == EditOp::kDel);
}

TEST_CASE("ties prefer substitution over insertion over deletion") {
  // Distance 2 with several optimal scripts; substitution wins the last step.
  auto script = Align({"a", "x"}, {"b"});
  REQUIRE(script.size() == 2);
  CHECK(script[0].op == EditOp::kDel);
  CHECK(script[1].op == EditOp::kSub);

  auto sub_only = Align({"a"}, {"b"});
  REQUIRE(sub_only.size() == 1);
  CHECK(sub_only[0].op == EditOp::kSub);
}

TEST_CASE("align cost and validity match the DP oracle on random pairs") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; trial++) {
    Tokens ref = RandomTokens(&rng, 20);
    Tokens hyp = RandomTokens(&rng, 20);
    auto script = Align(ref, hyp);
    CHECK(ScriptCost(script) == EditDistance(ref, hyp));
    CHECK(ApplyScript(ref, hyp, script) == hyp);
  }
}

TEST_CASE("identical corpora score zero everywhere") {
  std::vector<Tokens> refs = {{"a", "b"}, {"c"}};
  ErrorBreakdown b = ComputeBreakdown(refs, refs);
  CHECK(b.wer == 0.0);
  CHECK(b.ins == 0.0);
  CHECK(b.del == 0.0);
  CHECK(b.sub == 0.0);
  CHECK(b.n_ref_words == 3);
}

TEST_CASE("one substitution in ten reference words") {
  std::vector<Tokens> refs = {{"w1", "w2", "w3", "w4", "w5"},
                              {"w6", "w7", "w8", "w9", "w10"}};
  std::vector<Tokens> hyps = refs;
  hyps[1][2] = "wrong";
  ErrorBreakdown b = ComputeBreakdown(refs, hyps);
  CHECK(b.wer == 10.0);
  CHECK(b.ins == 0.0);
  CHECK(b.del == 0.0);
  CHECK(b.sub == 10.0);
}

TEST_CASE("wer reconciles with its breakdown on random corpora") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; trial++) {
    std::vector<Tokens> refs = {RandomTokens(&rng, 12)};
    std::vector<Tokens> hyps = {RandomTokens(&rng, 12)};
    if (refs[0].empty() && !hyps[0].empty()) continue;  // domain error case
    ErrorBreakdown b = ComputeBreakdown(refs, hyps);
    CHECK(std::fabs(b.wer - (b.ins + b.del + b.sub)) <= 1e-9);
    CHECK(b.wer >= 0.0);
    CHECK(b.ins >= 0.0);
    CHECK(b.del >= 0.0);
    CHECK(b.sub >= 0.0);
  }
}

TEST_CASE("corpus-level wer ignores utterance order") {
  std::vector<Transcript> refs = {{"u1", "abc"}, {"u2", "de"}, {"u3", "fgh"}};
  std::vector<Transcript> hyps = {{"u1", "abx"}, {"u2", "de"}, {"u3", "gh"}};
  CorpusScore a = ScoreCorpus(refs, hyps);
  std::reverse(hyps.begin(), hyps.end());
  std::vector<Transcript> refs2 = {refs[2], refs[0], refs[1]};
  CorpusScore b = ScoreCorpus(refs2, hyps);
  CHECK(a.word.wer == b.word.wer);
  CHECK(a.chr.wer == b.chr.wer);
  CHECK(a.chr.sub == b.chr.sub);
  CHECK(a.chr.del == b.chr.del);
}

TEST_CASE("score corpus pairs by id and validates the id sets") {
  std::vector<Transcript> refs = {{"u1", "abc"}};
  std::vector<Transcript> extra = {{"u1", "abc"}, {"u2", "d"}};
  bool threw = false;
  try {
    ScoreCorpus(refs, extra);
  } catch (const Error& e) {
    threw = e.kind() == ErrorKind::kFormat;
  }
  CHECK(threw);
}

TEST_CASE("character scoring strips whitespace") {
  CHECK(CharsOf("ab c") == Tokens{"a", "b", "c"});
  CHECK(WordsOf("  ab  c ") == Tokens{"ab", "c"});
  std::vector<Transcript> refs = {{"u1", "abcd"}};
  std::vector<Transcript> hyps = {{"u1", "abxd"}};
  CorpusScore s = ScoreCorpus(refs, hyps);
  CHECK(s.chr.sub == 25.0);
  CHECK(s.chr.wer == 25.0);
  CHECK(s.word.wer == 100.0);  // the single word differs
}

TEST_CASE("relative error reduction formula and fixtures") {
  CHECK(std::fabs(Werr(49.7, 27.3) - 45.1) <= 0.05);
  CHECK(std::fabs(Werr(34.0, 29.4) - 13.5) <= 0.05);
  for (double x : {3.7, 10.0, 55.1}) CHECK(Werr(x, x) == 0.0);
  bool threw = false;
  try {
    Werr(0.0, 1.0);
  } catch (const Error& e) {
    threw = e.kind() == ErrorKind::kDomain;
  }
  CHECK(threw);
}

TEST_CASE("error rendering uppercases errors and stars deletions") {
  CHECK(RenderErrors({"der", "anspruch", "ist"}, {"der", "spruch", "ist"}) ==
        "der SPRUCH ist");
  CHECK(RenderErrors({"a", "bc"}, {"a"}) == "a **");
  CHECK(RenderErrors({"a"}, {"a", "zz"}) == "a ZZ");
  CHECK(RenderErrors({}, {}) == "");
}
