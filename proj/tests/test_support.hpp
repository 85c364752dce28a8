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
#ifndef CDQAG_TESTS_TEST_SUPPORT_HPP_
#define CDQAG_TESTS_TEST_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdqag/error.hpp"
#include "cdqag/raster_io.hpp"
#include "cdqag/rng.hpp"
#include "cdqag/tensor.hpp"

namespace cdqag::testing {

// Taxonomy with `k` names "c0", "c1", ...
inline ClassTaxonomy NumberedTaxonomy(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
  return ClassTaxonomy(names);
}

inline SemanticMask MaskFromLabels(std::size_t width, std::size_t height,
                                   std::vector<ClassId> labels) {
  return SemanticMask{width, height, std::move(labels)};
}

// Random pair; `keep` is the probability that a pixel keeps its class.
inline MaskPair RandomPair(SplitMix64& rng, std::size_t width, std::size_t height,
                           std::size_t k, double keep = 0.6) {
  MaskPair p;
  p.pair_id = "rand";
  p.t1 = {width, height, std::vector<ClassId>(width * height)};
  p.t2 = p.t1;
  for (std::size_t i = 0; i < width * height; ++i) {
    p.t1.labels[i] = static_cast<ClassId>(rng.Below(k));
    p.t2.labels[i] = rng.Uniform() < keep ? p.t1.labels[i] : static_cast<ClassId>(rng.Below(k));
  }
  return p;
}

inline Tensor RandomTensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.Uniform(lo, hi);
  return t;
}

inline std::filesystem::path CorpusDir() { return CDQAG_CORPUS_DIR; }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cdqag_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Code of the cdqag::Error thrown by `fn`, or nullopt if it returns normally.
template <typename Fn>
std::optional<ErrorCode> CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace cdqag::testing

#endif  // CDQAG_TESTS_TEST_SUPPORT_HPP_
