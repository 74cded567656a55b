// enkit/common.h

// Copyright 2026  enkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ENKIT_COMMON_H_
#define ENKIT_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace enkit {

// Error hierarchy. Every failure the library can report derives from Error;
// the CLI maps the leaf classes onto its exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensor operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Numeric-domain violations: log of a nonpositive value, NaN/Inf results,
// failed decompositions (non-SPD matrix), diverged training.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// A caller broke a documented precondition (empty enrollment set,
// non-scalar loss, out-of-range hyperparameter, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Malformed input file (bad magic, truncation, unparsable line).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Bad run configuration: unknown key, unparsable value, inconsistent dims.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

#define ENKIT_CHECK(cond, ExcType, msg)       \
  do {                                        \
    if (!(cond)) throw ExcType(msg);          \
  } while (0)

// Deterministic random source. std::mt19937_64 has a standardized bit
// stream but the std:: distributions do not, so all draws are derived here
// explicitly; a given seed yields the same sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends; rejection-free modulo bias is irrelevant at
  // the range sizes used here but we reject anyway to keep draws exact.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via Box-Muller; the spare value is cached.
  double normal();

  double gamma(double shape);  // Gamma(shape, 1), shape > 0
  double beta(double a, double b);

  // Fisher-Yates with this stream (std::shuffle is implementation-defined).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(
          uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

  // Derive an independent stream (splitmix64 of the raw draw).
  std::uint64_t fork_seed();

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64: used for seed derivation and config hashing support.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over a byte string; model containers store this as the config hash.
std::uint64_t fnv1a64(const std::string& s);

}  // namespace enkit

#endif  // ENKIT_COMMON_H_
