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
#ifndef CDQAG_TESTS_ORACLE_RULE_ORACLE_HPP_
#define CDQAG_TESTS_ORACLE_RULE_ORACLE_HPP_

// Brute-force answer rules for tests. Every quantity is recounted by looping
// over pixels; no transition matrix, no summary, no library helper beyond the
// input types.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdqag/raster_io.hpp"

namespace cdqag::oracle {

struct OracleAnswer {
  std::string token;
  std::vector<std::uint8_t> grid;  // row-major, 1 = on
};

class RuleOracle {
 public:
  RuleOracle(const MaskPair& pair, std::vector<std::string> names, bool net = false)
      : a_(pair.t1.labels), b_(pair.t2.labels), names_(std::move(names)), net_(net) {}

  OracleAnswer CN(std::size_t k) const {
    if (Count([&](int a, int b) { return a != b && (a == I(k) || b == I(k)); }) == 0) {
      return {"no", Empty()};
    }
    return {"yes", Grid([&](int a, int b) { return a != b && (a == I(k) || b == I(k)); })};
  }

  OracleAnswer CtW(std::size_t k) const {
    std::optional<std::size_t> best;
    std::uint64_t best_count = 0;
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (j == k) continue;
      const auto c = Count([&](int a, int b) { return a == I(k) && b == I(j); });
      if (c > best_count) {
        best = j;
        best_count = c;
      }
    }
    if (!best) return {"none", Empty()};
    const std::size_t j = *best;
    return {names_[j], Grid([&](int a, int b) { return a == I(k) && b == I(j); })};
  }

  OracleAnswer CfW(std::size_t k) const {
    std::optional<std::size_t> best;
    std::uint64_t best_count = 0;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (i == k) continue;
      const auto c = Count([&](int a, int b) { return a == I(i) && b == I(k); });
      if (c > best_count) {
        best = i;
        best_count = c;
      }
    }
    if (!best) return {"none", Empty()};
    const std::size_t i = *best;
    return {names_[i], Grid([&](int a, int b) { return a == I(i) && b == I(k); })};
  }

  OracleAnswer IN(std::size_t k) const {
    const auto before = Count([&](int a, int) { return a == I(k); });
    const auto after = Count([&](int, int b) { return b == I(k); });
    if (after > before) return {"yes", Grid([&](int a, int b) { return b == I(k) && a != I(k); })};
    return {"no", Empty()};
  }

  OracleAnswer DN(std::size_t k) const {
    const auto before = Count([&](int a, int) { return a == I(k); });
    const auto after = Count([&](int, int b) { return b == I(k); });
    if (after < before) return {"yes", Grid([&](int a, int b) { return a == I(k) && b != I(k); })};
    return {"no", Empty()};
  }

  OracleAnswer LC() const { return Extreme(true); }
  OracleAnswer SC() const { return Extreme(false); }

  OracleAnswer CR(std::size_t k) const {
    const auto changed =
        Count([&](int a, int b) { return a != b && (a == I(k) || b == I(k)); });
    if (changed == 0) return {"0", Empty()};
    // Smallest b with 10 * changed <= b * total.
    std::uint64_t bucket = 1;
    while (10 * changed > bucket * a_.size()) ++bucket;
    const std::string token =
        std::to_string(10 * (bucket - 1)) + "_to_" + std::to_string(10 * bucket);
    return {token, Grid([&](int a, int b) { return a != b && (a == I(k) || b == I(k)); })};
  }

 private:
  static int I(std::size_t k) { return static_cast<int>(k); }

  template <typename Pred>
  std::uint64_t Count(Pred pred) const {
    std::uint64_t n = 0;
    for (std::size_t p = 0; p < a_.size(); ++p) n += pred(a_[p], b_[p]) ? 1 : 0;
    return n;
  }

  template <typename Pred>
  std::vector<std::uint8_t> Grid(Pred pred) const {
    std::vector<std::uint8_t> g(a_.size());
    for (std::size_t p = 0; p < a_.size(); ++p) g[p] = pred(a_[p], b_[p]) ? 1 : 0;
    return g;
  }

  std::vector<std::uint8_t> Empty() const { return std::vector<std::uint8_t>(a_.size(), 0); }

  std::uint64_t Measure(std::size_t k) const {
    if (!net_) return Count([&](int a, int b) { return a != b && (a == I(k) || b == I(k)); });
    const auto before = Count([&](int a, int) { return a == I(k); });
    const auto after = Count([&](int, int b) { return b == I(k); });
    return before > after ? before - after : after - before;
  }

  OracleAnswer Extreme(bool largest) const {
    std::optional<std::size_t> best;
    std::uint64_t best_value = 0;
    for (std::size_t k = 0; k < names_.size(); ++k) {
      const auto m = Measure(k);
      if (m == 0) continue;
      if (!best || (largest ? m > best_value : m < best_value)) {
        best = k;
        best_value = m;
      }
    }
    if (!best) return {"none", Empty()};
    const std::size_t k = *best;
    return {names_[k], Grid([&](int a, int b) { return a != b && (a == I(k) || b == I(k)); })};
  }

  std::vector<ClassId> a_, b_;
  std::vector<std::string> names_;
  bool net_;
};

}  // namespace cdqag::oracle

#endif  // CDQAG_TESTS_ORACLE_RULE_ORACLE_HPP_
