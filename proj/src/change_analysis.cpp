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
#include "cdqag/change_analysis.hpp"

#include <string>

#include "cdqag/error.hpp"

namespace cdqag {
namespace {

void CheckClass(std::size_t k, std::size_t num_classes) {
  if (k >= num_classes) {
    throw Error(ErrorCode::kClassIdOutOfRange,
                "class id " + std::to_string(k) + " >= " + std::to_string(num_classes));
  }
}

void CheckDims(const MaskPair& pair) {
  if (pair.t1.width != pair.t2.width || pair.t1.height != pair.t2.height ||
      pair.t1.labels.size() != pair.t2.labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pair '" + pair.pair_id + "': t1 and t2 differ in size");
  }
}

template <typename Pred>
BinaryMask MaskWhere(const MaskPair& pair, Pred pred) {
  const auto& a = pair.t1.labels;
  const auto& b = pair.t2.labels;
  std::vector<std::uint8_t> grid(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) grid[i] = pred(a[i], b[i]) ? 1 : 0;
  return RleEncode(grid, pair.width(), pair.height());
}

}  // namespace

TransitionMatrix ComputeTransitionMatrix(const MaskPair& pair,
                                         std::size_t num_classes) {
  CheckDims(pair);
  TransitionMatrix tm(num_classes, pair.pixels());
  const auto& a = pair.t1.labels;
  const auto& b = pair.t2.labels;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CheckClass(a[i], num_classes);
    CheckClass(b[i], num_classes);
    ++tm(a[i], b[i]);
  }
  return tm;
}

ClassChangeSummary Summarize(const TransitionMatrix& tm) {
  const std::size_t k = tm.num_classes();
  ClassChangeSummary s;
  s.area_t1.assign(k, 0);
  s.area_t2.assign(k, 0);
  s.gained.assign(k, 0);
  s.lost.assign(k, 0);
  s.changed.assign(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto c = tm(i, j);
      s.area_t1[i] += c;
      s.area_t2[j] += c;
      if (i != j) {
        s.lost[i] += c;
        s.gained[j] += c;
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) s.changed[i] = s.gained[i] + s.lost[i];
  return s;
}

BinaryMask ChangedMask(const MaskPair& pair, std::size_t k, ChangeRole role,
                       std::size_t num_classes) {
  CheckClass(k, num_classes);
  CheckDims(pair);
  switch (role) {
    case ChangeRole::kSource:
      return MaskWhere(pair, [k](ClassId a, ClassId b) { return a == k && b != k; });
    case ChangeRole::kTarget:
      return MaskWhere(pair, [k](ClassId a, ClassId b) { return b == k && a != k; });
    case ChangeRole::kEither:
      break;
  }
  return MaskWhere(pair, [k](ClassId a, ClassId b) {
    return (a == k) != (b == k);
  });
}

BinaryMask TransitionMask(const MaskPair& pair, std::size_t from, std::size_t to,
                          std::size_t num_classes) {
  CheckClass(from, num_classes);
  CheckClass(to, num_classes);
  if (from == to) {
    throw Error(ErrorCode::kSameClass, "transition mask needs distinct classes");
  }
  CheckDims(pair);
  return MaskWhere(pair, [from, to](ClassId a, ClassId b) {
    return a == from && b == to;
  });
}

}  // namespace cdqag
