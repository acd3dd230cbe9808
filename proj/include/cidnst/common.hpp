// cidnst/common.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_COMMON_HPP_
#define CIDNST_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cidnst {

// Error taxonomy shared by all modules. Every failure carries a kind so the
// CLI can map it to an exit code and tests can assert on the category.
enum class ErrorKind {
  kShape,
  kNumericFault,
  kTooShortInput,
  kVocab,
  kFormat,
  kCtcInfeasible,
  kEmptyBatch,
  kRange,
  kDomain,
  kGeneration,
  kConflict,
  kConfig,
  kTrainingFault,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

// 64-bit FNV-1a. Used for config hashes and seed derivation.
inline uint64_t Fnv1a64(const void* data, size_t n,
                        uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; i++) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t Fnv1a64(const std::string& s) {
  return Fnv1a64(s.data(), s.size());
}

inline uint64_t Splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// All randomness in the project flows from one root seed, expanded per stage
// by name. Same root seed + same tag -> same stream, regardless of what other
// stages consumed.
inline uint64_t DeriveSeed(uint64_t root, const std::string& tag) {
  return Splitmix64(root ^ Fnv1a64(tag));
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// distribution transforms are written out here because the std ones are
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t U64() { return gen_(); }

  // Uniform in [0, 1).
  double Uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n).
  int UniformInt(int n) {
    return n <= 1 ? 0 : static_cast<int>(gen_() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller, one cached spare.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    double u2 = Uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void Shuffle(std::vector<T>* v) {
    for (size_t i = v->size(); i > 1; i--) {
      size_t j = gen_() % i;
      std::swap((*v)[i - 1], (*v)[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Decode-time parallelism cap: CIDNST_THREADS env var, else hardware
// concurrency, at most 16.
int MaxThreads();

// Runs fn(i) for i in [0, n), chunked over at most MaxThreads() threads.
// fn must be safe to run concurrently for distinct i.
void ParallelFor(int n, const std::function<void(int)>& fn);

}  // namespace cidnst

#endif  // CIDNST_COMMON_HPP_
