#include "cage/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cage/errors.hpp"
#include "cage/image_io.hpp"
#include "cage/rng.hpp"

namespace fs = std::filesystem;

namespace cage {

std::array<std::array<int, 2>, kNumAgeClasses> DatasetManifest::class_counts() const {
  std::array<std::array<int, 2>, kNumAgeClasses> counts{};
  for (const Sample& s : samples)
    counts[static_cast<std::size_t>(s.label)][s.split == SplitTag::Train ? 0 : 1]++;
  return counts;
}

std::vector<std::size_t> DatasetManifest::indices(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == tag) out.push_back(i);
  return out;
}

DatasetManifest ingest(const std::string& root_dir, std::vector<std::string>* warnings) {
  if (!fs::is_directory(root_dir)) throw DataError("dataset root not found: " + root_dir);
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  DatasetManifest manifest;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root_dir))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  for (const fs::path& dir : class_dirs) {
    const int label = age_class_from_label(dir.filename().string());
    if (label < 0) {
      warn("skipping unknown class directory: " + dir.string());
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file() && image_extension_supported(entry.path().string()))
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
      try {
        load_image(file.string());
      } catch (const Error& e) {
        warn("skipping unreadable image " + file.string() + ": " + e.what());
        continue;
      }
      manifest.samples.push_back({file.string(), label, SplitTag::Train});
    }
  }
  if (manifest.samples.empty())
    throw DataError("no readable samples under " + root_dir);
  return manifest;
}

DatasetManifest split(DatasetManifest manifest, double ratio, std::uint64_t seed,
                      std::vector<std::string>* warnings) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValueError("split ratio must be in (0,1)");
  manifest.seed = seed;
  const Rng base(seed);
  for (int cls = 0; cls < kNumAgeClasses; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i)
      if (manifest.samples[i].label == cls) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < 2) {
      if (warnings)
        warnings->push_back("class " + age_class_labels()[static_cast<std::size_t>(cls)] +
                            " has fewer than 2 samples; keeping all in train");
      for (std::size_t i : members) manifest.samples[i].split = SplitTag::Train;
      continue;
    }
    // Fisher-Yates with a per-class stream
    Rng rng = base.derive(static_cast<std::uint64_t>(cls));
    for (std::size_t i = members.size() - 1; i > 0; --i)
      std::swap(members[i], members[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    const auto n_train =
        static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k)
      manifest.samples[members[k]].split = k < n_train ? SplitTag::Train : SplitTag::Val;
  }
  return manifest;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const Sample& s : manifest.samples)
    out << s.path << '\t' << age_class_labels()[static_cast<std::size_t>(s.label)] << '\t'
        << (s.split == SplitTag::Train ? "train" : "val") << '\n';
  if (!out) throw IoError("short write to " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  DatasetManifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected path<TAB>label<TAB>split");
    Sample s;
    s.path = line.substr(0, t1);
    const std::string label = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string split_tag = line.substr(t2 + 1);
    s.label = age_class_from_label(label);
    if (s.label < 0)
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown age class " + label);
    if (split_tag == "train") s.split = SplitTag::Train;
    else if (split_tag == "val") s.split = SplitTag::Val;
    else
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown split " + split_tag);
    manifest.samples.push_back(std::move(s));
  }
  if (manifest.samples.empty()) throw DataError(path + ": empty manifest");
  return manifest;
}

}  // namespace cage
