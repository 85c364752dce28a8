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
#ifndef CDQAG_CHANGE_ANALYSIS_HPP_
#define CDQAG_CHANGE_ANALYSIS_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdqag/raster_io.hpp"

namespace cdqag {

// counts(i, j) = number of pixels with class i at T1 and class j at T2.
class TransitionMatrix {
 public:
  TransitionMatrix(std::size_t num_classes, std::uint64_t total)
      : k_(num_classes), total_(total), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return k_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t operator()(std::size_t from, std::size_t to) const {
    return counts_[from * k_ + to];
  }
  std::uint64_t& operator()(std::size_t from, std::size_t to) {
    return counts_[from * k_ + to];
  }

 private:
  std::size_t k_;
  std::uint64_t total_;
  std::vector<std::uint64_t> counts_;
};

struct ClassChangeSummary {
  std::vector<std::uint64_t> area_t1;
  std::vector<std::uint64_t> area_t2;
  std::vector<std::uint64_t> gained;   // pixels entering k
  std::vector<std::uint64_t> lost;     // pixels leaving k
  std::vector<std::uint64_t> changed;  // gained + lost
};

enum class ChangeRole { kSource, kTarget, kEither };

TransitionMatrix ComputeTransitionMatrix(const MaskPair& pair,
                                         std::size_t num_classes);
ClassChangeSummary Summarize(const TransitionMatrix& tm);

// Pixels that left (source), entered (target) or did either for class k.
BinaryMask ChangedMask(const MaskPair& pair, std::size_t k, ChangeRole role,
                       std::size_t num_classes);
// Pixels with class `from` at T1 and class `to` at T2; from != to.
BinaryMask TransitionMask(const MaskPair& pair, std::size_t from, std::size_t to,
                          std::size_t num_classes);

}  // namespace cdqag

#endif  // CDQAG_CHANGE_ANALYSIS_HPP_
