// cidnst/metrics.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cidnst/common.hpp"

namespace cidnst {

std::vector<AlignStep> Align(const std::vector<std::string>& ref,
                             const std::vector<std::string>& hyp) {
  size_t r = ref.size(), h = hyp.size();
  std::vector<std::vector<int>> d(r + 1, std::vector<int>(h + 1, 0));
  for (size_t i = 0; i <= r; i++) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= h; j++) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= r; i++) {
    for (size_t j = 1; j <= h; j++) {
      int diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i][j - 1] + 1, d[i - 1][j] + 1});
    }
  }

  // Backtrace preferring substitution, then insertion, then deletion; the
  // script comes out reversed.
  std::vector<AlignStep> script;
  size_t i = r, j = h;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      EditOp op = ref[i - 1] == hyp[j - 1] ? EditOp::kMatch : EditOp::kSub;
      script.push_back({op, static_cast<int>(i - 1), static_cast<int>(j - 1)});
      i--;
      j--;
    } else if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      script.push_back({EditOp::kIns, -1, static_cast<int>(j - 1)});
      j--;
    } else {
      script.push_back({EditOp::kDel, static_cast<int>(i - 1), -1});
      i--;
    }
  }
  std::reverse(script.begin(), script.end());
  return script;
}

ErrorBreakdown ComputeBreakdown(
    const std::vector<std::vector<std::string>>& refs,
    const std::vector<std::vector<std::string>>& hyps) {
  if (refs.size() != hyps.size()) {
    Fail(ErrorKind::kShape, "breakdown: corpus sizes differ");
  }
  size_t n_ref = 0, ins = 0, del = 0, sub = 0;
  for (size_t u = 0; u < refs.size(); u++) {
    n_ref += refs[u].size();
    for (const AlignStep& s : Align(refs[u], hyps[u])) {
      ins += s.op == EditOp::kIns;
      del += s.op == EditOp::kDel;
      sub += s.op == EditOp::kSub;
    }
  }
  ErrorBreakdown out;
  out.n_ref_words = n_ref;
  size_t errors = ins + del + sub;
  if (n_ref == 0) {
    if (errors > 0) {
      Fail(ErrorKind::kDomain, "breakdown: errors against an empty reference");
    }
    return out;
  }
  double denom = static_cast<double>(n_ref);
  out.ins = 100.0 * static_cast<double>(ins) / denom;
  out.del = 100.0 * static_cast<double>(del) / denom;
  out.sub = 100.0 * static_cast<double>(sub) / denom;
  out.wer = 100.0 * static_cast<double>(errors) / denom;
  return out;
}

double Werr(double baseline_wer, double improved_wer) {
  if (!(baseline_wer > 0)) {
    Fail(ErrorKind::kDomain, "werr: baseline must be > 0");
  }
  return 100.0 * (baseline_wer - improved_wer) / baseline_wer;
}

std::vector<std::string> WordsOf(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> CharsOf(const std::string& text) {
  std::vector<std::string> chars;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      chars.push_back(std::string(1, c));
    }
  }
  return chars;
}

CorpusScore ScoreCorpus(const std::vector<Transcript>& refs,
                        const std::vector<Transcript>& hyps) {
  std::map<std::string, const std::string*> by_id;
  for (const Transcript& h : hyps) {
    if (!by_id.emplace(h.utt_id, &h.text).second) {
      Fail(ErrorKind::kFormat, "score: duplicate hypothesis id " + h.utt_id);
    }
  }
  if (by_id.size() != refs.size()) {
    Fail(ErrorKind::kFormat, "score: reference and hypothesis ids differ");
  }
  std::vector<std::vector<std::string>> rw, hw, rc, hc;
  for (const Transcript& r : refs) {
    auto it = by_id.find(r.utt_id);
    if (it == by_id.end()) {
      Fail(ErrorKind::kFormat, "score: no hypothesis for " + r.utt_id);
    }
    rw.push_back(WordsOf(r.text));
    hw.push_back(WordsOf(*it->second));
    rc.push_back(CharsOf(r.text));
    hc.push_back(CharsOf(*it->second));
  }
  CorpusScore out;
  out.word = ComputeBreakdown(rw, hw);
  out.chr = ComputeBreakdown(rc, hc);
  return out;
}

std::string RenderErrors(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
  std::string line;
  for (const AlignStep& s : Align(ref, hyp)) {
    if (!line.empty()) line.push_back(' ');
    switch (s.op) {
      case EditOp::kMatch:
        line += hyp[s.hyp_idx];
        break;
      case EditOp::kSub:
      case EditOp::kIns: {
        std::string w = hyp[s.hyp_idx];
        for (char& c : w) c = static_cast<char>(std::toupper(
                              static_cast<unsigned char>(c)));
        line += w;
        break;
      }
      case EditOp::kDel:
        line += std::string(ref[s.ref_idx].size(), '*');
        break;
    }
  }
  return line;
}

}  // namespace cidnst
