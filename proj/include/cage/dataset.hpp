#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cage/network.hpp"

namespace cage {

enum class SplitTag { Train, Val };

struct Sample {
  std::string path;
  int label = 0;                     // AgeClass index 0..7
  SplitTag split = SplitTag::Train;

  bool operator==(const Sample&) const = default;
};

struct DatasetManifest {
  std::vector<Sample> samples;
  std::uint64_t seed = 0;

  std::array<std::array<int, 2>, kNumAgeClasses> class_counts() const;  // [class][train,val]
  std::vector<std::size_t> indices(SplitTag tag) const;
};

/// Walks root_dir expecting one subdirectory per age-class label
/// ("0-2" ... "60+"); every readable image under a known label becomes a
/// sample (initially all-train). Unknown subdirectories and unreadable
/// files are reported through warnings and skipped.
DatasetManifest ingest(const std::string& root_dir, std::vector<std::string>* warnings = nullptr);

/// Deterministic per-class shuffle with the seed; the first
/// ceil(ratio * n) of each class go to train. Classes with fewer than two
/// samples stay whole in train and produce a warning.
DatasetManifest split(DatasetManifest manifest, double ratio, std::uint64_t seed,
                      std::vector<std::string>* warnings = nullptr);

/// Manifest file: `path<TAB>label<TAB>split`, one sample per line, UTF-8.
void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

}  // namespace cage
