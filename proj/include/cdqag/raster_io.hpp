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
#ifndef CDQAG_RASTER_IO_HPP_
#define CDQAG_RASTER_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cdqag {

using ClassId = std::uint8_t;

// Ordered land-cover class names; the position of a name is its class id.
class ClassTaxonomy {
 public:
  explicit ClassTaxonomy(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  // Returns size() when the name is unknown.
  std::size_t IdOf(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

// The 10-class placeholder taxonomy shipped with the bundled corpus.
ClassTaxonomy DefaultTaxonomy();
ClassTaxonomy TaxonomyFromJson(const nlohmann::json& j);
ClassTaxonomy LoadTaxonomy(const std::filesystem::path& path);
nlohmann::json TaxonomyToJson(const ClassTaxonomy& taxonomy);

struct SemanticMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<ClassId> labels;  // row-major, labels[r * width + c]

  ClassId at(std::size_t row, std::size_t col) const {
    return labels[row * width + col];
  }
};

// Throws if dimensions are inconsistent or any label is >= num_classes.
void ValidateMask(const SemanticMask& mask, std::size_t num_classes);

struct MaskPair {
  std::string pair_id;
  SemanticMask t1;
  SemanticMask t2;

  std::size_t width() const { return t1.width; }
  std::size_t height() const { return t1.height; }
  std::size_t pixels() const { return t1.width * t1.height; }
};

void ValidatePair(const MaskPair& pair, std::size_t num_classes);

// Binary grounding mask stored as alternating run lengths (0s first).
struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint64_t> runs;

  std::size_t pixels() const { return width * height; }
  std::uint64_t Popcount() const;
  bool IsEmpty() const { return Popcount() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

BinaryMask EmptyMask(std::size_t width, std::size_t height);

BinaryMask RleEncode(std::span<const std::uint8_t> grid, std::size_t width,
                     std::size_t height);
std::vector<std::uint8_t> RleDecode(const BinaryMask& mask);

// {"size": [H, W], "counts": [...]}
nlohmann::ordered_json MaskToJson(const BinaryMask& mask);
BinaryMask MaskFromJson(const nlohmann::json& j);

// PGM (P2 ASCII or P5 binary, maxval <= 255). Pixel values are class ids.
SemanticMask ParsePgm(std::string_view bytes, std::size_t num_classes);
SemanticMask LoadMask(const std::filesystem::path& path,
                      const ClassTaxonomy& taxonomy);
// Writes a binary P5 file with maxval 255.
void SaveMask(const std::filesystem::path& path, const SemanticMask& mask);

// Reads <dir>/<pair_id>_t1.pgm and <dir>/<pair_id>_t2.pgm.
MaskPair LoadPair(const std::filesystem::path& dir, const std::string& pair_id,
                  const ClassTaxonomy& taxonomy);
// Sorted pair ids for which both _t1.pgm and _t2.pgm exist in dir.
std::vector<std::string> DiscoverPairs(const std::filesystem::path& dir);

std::string ReadFile(const std::filesystem::path& path);

}  // namespace cdqag

#endif  // CDQAG_RASTER_IO_HPP_
