// focce/rng.h
//
// Copyright      2026   The focce authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FOCCE_RNG_H_
#define FOCCE_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>

namespace focce {

// Seeded generator with hand-rolled uniform/normal mappings so that streams
// are bit-identical for a given seed independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t NextU64() { return gen_(); }

  // Uniform in [0, 1).
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal via Box-Muller; the second deviate is cached.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so log() is finite.
    double u1 = (static_cast<double>(NextU64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = Uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n).
  int Int(int n) { return static_cast<int>(NextU64() % static_cast<uint64_t>(n)); }

  // Derives an independent child seed; used to give each utterance or each
  // run its own stream.
  uint64_t Fork() { return NextU64() ^ 0x9e3779b97f4a7c15ULL; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace focce

#endif  // FOCCE_RNG_H_
