// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>

#include "cidnst/schedules.hpp"
#include "doctest.h"

using namespace cidnst;

namespace {

AlphaSchedule Decay(int total) {
  AlphaSchedule s;
  s.mode = AlphaSchedule::Mode::kDecay;
  s.total_epochs = total;
  return s;
}

}  // namespace

TEST_CASE("alpha holds at 0.9 for the first three epochs") {
  AlphaSchedule s = Decay(13);
  CHECK(AlphaAt(0, s) == 0.9);
  CHECK(AlphaAt(1, s) == 0.9);
  CHECK(AlphaAt(2, s) == 0.9);
}

TEST_CASE("alpha decays linearly to the floor at the final epoch") {
  AlphaSchedule s = Decay(13);
  CHECK(AlphaAt(8, s) == doctest::Approx(0.9 - (0.8 / 9.0) * 5.0).epsilon(1e-12));
  // The final epoch is the floor itself, exactly.
  CHECK(AlphaAt(12, s) == 0.1);
}

TEST_CASE("alpha is non-increasing under decay") {
  for (int total : {4, 7, 13, 40}) {
    AlphaSchedule s = Decay(total);
    double prev = AlphaAt(0, s);
    for (int e = 1; e < total; e++) {
      double a = AlphaAt(e, s);
      CHECK(a <= prev);
      prev = a;
    }
    CHECK(prev == doctest::Approx(0.1).epsilon(1e-12));
  }
}

TEST_CASE("alpha epoch range and schedule invariants are enforced") {
  AlphaSchedule s = Decay(5);
  CHECK_THROWS_AS(AlphaAt(5, s), Error);
  CHECK_THROWS_AS(AlphaAt(-1, s), Error);
  AlphaSchedule bad = Decay(3);
  bad.hold_epochs = 3;
  CHECK_THROWS_AS(AlphaAt(0, bad), Error);
  AlphaSchedule badf = Decay(5);
  badf.floor = 0.95;
  CHECK_THROWS_AS(AlphaAt(0, badf), Error);
  AlphaSchedule fx;
  fx.mode = AlphaSchedule::Mode::kFixed;
  fx.fixed = 0.5;
  CHECK(AlphaAt(999, fx) == 0.5);
}

TEST_CASE("beta policies on the worked fixture") {
  BetaPolicy p;
  p.kind = BetaPolicy::Kind::kMin;
  auto r = ResolveBeta(1.0, 2.0, 0.5, p);
  CHECK(r.beta_used == 0.0);
  CHECK(r.l_unpair == doctest::Approx(1.5).epsilon(1e-12));

  p.kind = BetaPolicy::Kind::kMax;
  r = ResolveBeta(1.0, 2.0, 0.5, p);
  CHECK(r.beta_used == 1.0);
  CHECK(r.l_unpair == doctest::Approx(3.0).epsilon(1e-12));

  p.kind = BetaPolicy::Kind::kAvg;
  r = ResolveBeta(1.0, 2.0, 0.5, p);
  CHECK(r.beta_used == 0.5);
  CHECK(r.l_unpair == doctest::Approx(2.25).epsilon(1e-12));

  p.kind = BetaPolicy::Kind::kMed;
  r = ResolveBeta(1.0, 2.0, 0.5, p);
  CHECK(r.l_unpair == doctest::Approx(2.25).epsilon(1e-12));
}

TEST_CASE("equal cyc and text collapse every policy, min ties to beta 0") {
  for (auto kind : {BetaPolicy::Kind::kMin, BetaPolicy::Kind::kMax,
                    BetaPolicy::Kind::kAvg, BetaPolicy::Kind::kMed}) {
    BetaPolicy p;
    p.kind = kind;
    auto r = ResolveBeta(0.7, 1.3, 1.3, p);
    CHECK(r.l_unpair == doctest::Approx(2.0).epsilon(1e-12));
  }
  BetaPolicy pmin;
  pmin.kind = BetaPolicy::Kind::kMin;
  CHECK(ResolveBeta(0.7, 1.3, 1.3, pmin).beta_used == 0.0);
}

TEST_CASE("grid extremes sit at the endpoints and avg equals med exactly") {
  Rng rng(DeriveSeed(5, "beta"));
  BetaPolicy pmin, pmax, pavg, pmed;
  pmin.kind = BetaPolicy::Kind::kMin;
  pmax.kind = BetaPolicy::Kind::kMax;
  pavg.kind = BetaPolicy::Kind::kAvg;
  pmed.kind = BetaPolicy::Kind::kMed;
  for (int t = 0; t < 1000; t++) {
    double li = rng.Uniform(0.0, 4.0);
    double lc = rng.Uniform(0.0, 4.0);
    double lt = rng.Uniform(0.0, 4.0);
    auto rmin = ResolveBeta(li, lc, lt, pmin);
    auto rmax = ResolveBeta(li, lc, lt, pmax);
    auto ravg = ResolveBeta(li, lc, lt, pavg);
    auto rmed = ResolveBeta(li, lc, lt, pmed);
    CHECK((rmin.beta_used == 0.0 || rmin.beta_used == 1.0));
    CHECK((rmax.beta_used == 0.0 || rmax.beta_used == 1.0));
    CHECK(ravg.l_unpair == rmed.l_unpair);
    CHECK(rmin.l_unpair <= ravg.l_unpair);
    CHECK(ravg.l_unpair <= rmax.l_unpair);
  }
}

TEST_CASE("non-finite component losses are rejected") {
  BetaPolicy p;
  CHECK_THROWS_AS(ResolveBeta(std::nan(""), 1.0, 1.0, p), Error);
}

TEST_CASE("experiment names round-trip and fix alpha for non-decay rows") {
  auto s = ParseExperimentName("decay-min-unpair-loss", 12);
  CHECK(s.alpha.mode == AlphaSchedule::Mode::kDecay);
  CHECK(s.alpha.total_epochs == 12);
  CHECK(s.beta.kind == BetaPolicy::Kind::kMin);
  CHECK(ExperimentName(s) == "decay-min-unpair-loss");

  auto f = ParseExperimentName("avg-unpair-loss", 12);
  CHECK(f.alpha.mode == AlphaSchedule::Mode::kFixed);
  CHECK(f.alpha.fixed == 0.5);
  CHECK(ExperimentName(f) == "avg-unpair-loss");

  CHECK_THROWS_AS(ParseExperimentName("mean-unpair-loss", 12), Error);
}
