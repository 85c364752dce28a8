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
#include "cdqag/raster_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "cdqag/error.hpp"

namespace cdqag {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kClassIdOutOfRange: return "ClassIdOutOfRange";
    case ErrorCode::kEmptyImage: return "EmptyImage";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kInvalidRuns: return "InvalidRuns";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSameClass: return "SameClass";
    case ErrorCode::kTemplateOutOfRange: return "TemplateOutOfRange";
    case ErrorCode::kInvalidTemplates: return "InvalidTemplates";
    case ErrorCode::kBadRatios: return "BadRatios";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kMissingPrediction: return "MissingPrediction";
    case ErrorCode::kDuplicatePrediction: return "DuplicatePrediction";
    case ErrorCode::kUnknownTripletId: return "UnknownTripletId";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kBadStride: return "BadStride";
    case ErrorCode::kBadFactor: return "BadFactor";
    case ErrorCode::kHeadMismatch: return "HeadMismatch";
    case ErrorCode::kTokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorCode::kTooLong: return "TooLong";
    case ErrorCode::kBadTarget: return "BadTarget";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kInvalidTaxonomy: return "InvalidTaxonomy";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

namespace {

bool IsValidClassName(const std::string& name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

}  // namespace

ClassTaxonomy::ClassTaxonomy(std::vector<std::string> names)
    : names_(std::move(names)) {
  if (names_.size() < 2 || names_.size() > 255) {
    throw Error(ErrorCode::kInvalidTaxonomy,
                "class count must be in [2, 255], got " +
                    std::to_string(names_.size()));
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!IsValidClassName(n)) {
      throw Error(ErrorCode::kInvalidTaxonomy, "bad class name '" + n + "'");
    }
    if (!seen.insert(n).second) {
      throw Error(ErrorCode::kInvalidTaxonomy, "duplicate class name '" + n + "'");
    }
  }
}

std::size_t ClassTaxonomy::IdOf(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return static_cast<std::size_t>(it - names_.begin());
}

ClassTaxonomy DefaultTaxonomy() {
  return ClassTaxonomy({"background", "building", "low_vegetation", "tree",
                        "water", "playground", "road", "bare_ground",
                        "nvg_surface", "other"});
}

ClassTaxonomy TaxonomyFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("names") || !j["names"].is_array()) {
    throw Error(ErrorCode::kInvalidTaxonomy, "expected {\"names\": [...]}");
  }
  std::vector<std::string> names;
  for (const auto& n : j["names"]) {
    if (!n.is_string()) {
      throw Error(ErrorCode::kInvalidTaxonomy, "class names must be strings");
    }
    names.push_back(n.get<std::string>());
  }
  return ClassTaxonomy(std::move(names));
}

ClassTaxonomy LoadTaxonomy(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": " + e.what());
  }
  return TaxonomyFromJson(j);
}

nlohmann::json TaxonomyToJson(const ClassTaxonomy& taxonomy) {
  return nlohmann::json{{"names", taxonomy.names()}};
}

void ValidateMask(const SemanticMask& mask, std::size_t num_classes) {
  if (mask.width == 0 || mask.height == 0) {
    throw Error(ErrorCode::kEmptyImage, "mask has a zero dimension");
  }
  if (mask.labels.size() != mask.width * mask.height) {
    throw Error(ErrorCode::kSizeMismatch, "label count != width*height");
  }
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.labels[i] >= num_classes) {
      throw Error(ErrorCode::kClassIdOutOfRange,
                  "pixel " + std::to_string(i) + " has class id " +
                      std::to_string(mask.labels[i]) + " >= " +
                      std::to_string(num_classes));
    }
  }
}

void ValidatePair(const MaskPair& pair, std::size_t num_classes) {
  if (pair.t1.width != pair.t2.width || pair.t1.height != pair.t2.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pair '" + pair.pair_id + "': t1 and t2 differ in size");
  }
  ValidateMask(pair.t1, num_classes);
  ValidateMask(pair.t2, num_classes);
}

std::uint64_t BinaryMask::Popcount() const {
  std::uint64_t on = 0;
  for (std::size_t i = 1; i < runs.size(); i += 2) on += runs[i];
  return on;
}

BinaryMask EmptyMask(std::size_t width, std::size_t height) {
  return BinaryMask{width, height, {static_cast<std::uint64_t>(width * height)}};
}

BinaryMask RleEncode(std::span<const std::uint8_t> grid, std::size_t width,
                     std::size_t height) {
  if (grid.size() != width * height) {
    throw Error(ErrorCode::kSizeMismatch,
                "grid has " + std::to_string(grid.size()) + " cells, expected " +
                    std::to_string(width * height));
  }
  BinaryMask out{width, height, {}};
  std::uint8_t current = 0;
  std::uint64_t count = 0;
  for (std::uint8_t v : grid) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit != current) {
      out.runs.push_back(count);
      count = 0;
      current = bit;
    }
    ++count;
  }
  out.runs.push_back(count);
  return out;
}

std::vector<std::uint8_t> RleDecode(const BinaryMask& mask) {
  std::uint64_t total = 0;
  for (auto r : mask.runs) total += r;
  if (total != mask.width * mask.height) {
    throw Error(ErrorCode::kInvalidRuns,
                "runs sum to " + std::to_string(total) + ", expected " +
                    std::to_string(mask.width * mask.height));
  }
  std::vector<std::uint8_t> grid;
  grid.reserve(total);
  std::uint8_t value = 0;
  for (auto r : mask.runs) {
    grid.insert(grid.end(), r, value);
    value ^= 1;
  }
  return grid;
}

nlohmann::ordered_json MaskToJson(const BinaryMask& mask) {
  nlohmann::ordered_json j;
  j["size"] = {mask.height, mask.width};
  j["counts"] = mask.runs;
  return j;
}

BinaryMask MaskFromJson(const nlohmann::json& j) {
  try {
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2) {
      throw Error(ErrorCode::kMalformedFile, "mask size must be [H, W]");
    }
    BinaryMask m;
    m.height = size[0].get<std::size_t>();
    m.width = size[1].get<std::size_t>();
    for (const auto& c : j.at("counts")) {
      if (!c.is_number_integer() || c.get<std::int64_t>() < 0) {
        throw Error(ErrorCode::kInvalidRuns, "counts must be non-negative integers");
      }
      m.runs.push_back(c.get<std::uint64_t>());
    }
    std::uint64_t total = 0;
    for (auto r : m.runs) total += r;
    if (total != m.pixels()) {
      throw Error(ErrorCode::kInvalidRuns, "counts do not sum to H*W");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("mask json: ") + e.what());
  }
}

namespace {

// Header tokenizer shared by P2 and P5; honours '#' comments.
class PgmReader {
 public:
  explicit PgmReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
                 c == '\v') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  bool ReadUnsigned(unsigned long& value) {
    SkipSpaceAndComments();
    const char* begin = bytes_.data() + pos_;
    const char* end = bytes_.data() + bytes_.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) return false;
    pos_ += static_cast<std::size_t>(ptr - begin);
    return true;
  }

  void Advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

SemanticMask ParsePgm(std::string_view bytes, std::size_t num_classes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw Error(ErrorCode::kMalformedFile, "expected P2 or P5 magic");
  }
  const bool binary = bytes[1] == '5';
  PgmReader reader(bytes);
  reader.Advance(2);

  unsigned long width = 0, height = 0, maxval = 0;
  if (!reader.ReadUnsigned(width) || !reader.ReadUnsigned(height) ||
      !reader.ReadUnsigned(maxval)) {
    throw Error(ErrorCode::kMalformedFile, "truncated PGM header");
  }
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::kEmptyImage, "PGM has a zero dimension");
  }
  if (maxval == 0 || maxval > 255) {
    throw Error(ErrorCode::kMalformedFile, "only 8-bit PGM is supported");
  }

  SemanticMask mask;
  mask.width = width;
  mask.height = height;
  const std::size_t n = width * height;
  mask.labels.resize(n);

  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    std::size_t start = reader.pos() + 1;
    if (start > bytes.size() || bytes.size() - start < n) {
      throw Error(ErrorCode::kMalformedFile, "truncated P5 raster");
    }
    for (std::size_t i = 0; i < n; ++i) {
      mask.labels[i] = static_cast<ClassId>(static_cast<unsigned char>(bytes[start + i]));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      unsigned long v = 0;
      if (!reader.ReadUnsigned(v)) {
        throw Error(ErrorCode::kMalformedFile, "truncated P2 raster");
      }
      if (v > maxval) {
        throw Error(ErrorCode::kMalformedFile, "pixel value exceeds maxval");
      }
      mask.labels[i] = static_cast<ClassId>(v);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.labels[i] > maxval) {
      throw Error(ErrorCode::kMalformedFile, "pixel value exceeds maxval");
    }
  }
  ValidateMask(mask, num_classes);
  return mask;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SemanticMask LoadMask(const std::filesystem::path& path,
                      const ClassTaxonomy& taxonomy) {
  try {
    return ParsePgm(ReadFile(path), taxonomy.size());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void SaveMask(const std::filesystem::path& path, const SemanticMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.labels.data()),
            static_cast<std::streamsize>(mask.labels.size()));
}

MaskPair LoadPair(const std::filesystem::path& dir, const std::string& pair_id,
                  const ClassTaxonomy& taxonomy) {
  MaskPair pair;
  pair.pair_id = pair_id;
  pair.t1 = LoadMask(dir / (pair_id + "_t1.pgm"), taxonomy);
  pair.t2 = LoadMask(dir / (pair_id + "_t2.pgm"), taxonomy);
  ValidatePair(pair, taxonomy.size());
  return pair;
}

std::vector<std::string> DiscoverPairs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, dir.string() + " is not a directory");
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    constexpr std::string_view kSuffix = "_t1.pgm";
    if (name.size() > kSuffix.size() &&
        name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
      std::string id = name.substr(0, name.size() - kSuffix.size());
      if (fs::exists(dir / (id + "_t2.pgm"))) ids.push_back(std::move(id));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace cdqag
