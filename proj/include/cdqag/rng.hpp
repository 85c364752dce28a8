/* Copyright 2026 The cdqag-forge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CDQAG_RNG_HPP_
#define CDQAG_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace cdqag {

// SplitMix64 (Steele, Lea & Flood 2014). Every random draw in the toolkit goes
// through this generator so that golden files can be reproduced by any
// implementation that follows the same recipe:
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t Next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound). Plain modulo; the bias is irrelevant for
  // the small bounds used here and keeps the recipe trivially portable.
  std::uint64_t Below(std::uint64_t bound) { return Next() % bound; }

  // Uniform double in [0, 1) from the top 53 bits.
  double Uniform() {
    return static_cast<double>(Next() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a, used to derive per-item streams (e.g. one per pair id) from a
// global seed independent of processing order.
inline std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view key) {
  SplitMix64 mix(seed ^ Fnv1a64(key));
  return mix.Next();
}

}  // namespace cdqag

#endif  // CDQAG_RNG_HPP_
