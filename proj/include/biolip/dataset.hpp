#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "biolip/error.hpp"
#include "biolip/kinematics.hpp"
#include "biolip/network.hpp"
#include "biolip/region_map.hpp"
#include "biolip/trajectory.hpp"

namespace biolip {

struct Rejection {
  std::string path;
  std::string reason;
};

struct LoadedDataset {
  std::vector<NormalizedSequence> sequences;
  std::vector<Rejection> rejected;
  std::size_t malformed_lines = 0;
};

inline TrajectorySequence read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return parse_trajectory_file(in);
}

/// Sorted list of *.jsonl files in a directory.
inline std::vector<std::filesystem::path> list_jsonl(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::io_failure, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

/// Input files named by `path`: every *.jsonl in a directory, a single .jsonl file, or a
/// split list (one path per line, relative to the list's directory, '#' starts a comment).
inline std::vector<std::filesystem::path> input_files(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return list_jsonl(path);
  if (!std::filesystem::is_regular_file(path)) throw Error(Errc::io_failure, "no such input: " + path.string());
  if (path.extension() == ".jsonl") return {path};
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::filesystem::path> files;
  std::string line;
  while (std::getline(in, line)) {
    line = line.substr(0, line.find('#'));
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    std::filesystem::path p(line);
    files.push_back(p.is_absolute() ? p : path.parent_path() / p);
  }
  return files;
}

/// Parses and filters every file; sequences that fail filtering are reported, not fatal.
inline LoadedDataset load_files(const std::vector<std::filesystem::path>& files, const RegionMap& rm,
                                std::size_t min_valid_run = 25) {
  LoadedDataset out;
  for (const auto& path : files) {
    try {
      auto raw = read_trajectory(path);
      out.malformed_lines += raw.malformed_lines;
      out.sequences.push_back(filter_sequence(raw, rm, min_valid_run));
    } catch (const Error& e) {
      if (e.code() == Errc::io_failure || e.code() == Errc::invalid_config) throw;
      out.rejected.push_back({path.string(), e.what()});
    }
  }
  return out;
}

/// load_files over input_files(path).
inline LoadedDataset load_dataset(const std::filesystem::path& path, const RegionMap& rm,
                                  std::size_t min_valid_run = 25) {
  return load_files(input_files(path), rm, min_valid_run);
}

struct WindowRef {
  std::size_t sequence = 0;
  Window window;
};

/// All windows of a set of sequences, addressable by flat index.
class WindowSet {
 public:
  WindowSet(const std::vector<NormalizedSequence>& seqs, FeatureConfig cfg, RegionMap rm)
      : seqs_(&seqs), cfg_(std::move(cfg)), rm_(std::move(rm)) {
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      first_.push_back(refs_.size());
      for (const auto& w : windows(seqs[s], cfg_)) refs_.push_back({s, w});
    }
    first_.push_back(refs_.size());
  }

  std::size_t size() const { return refs_.size(); }
  const WindowRef& ref(std::size_t i) const { return refs_[i]; }
  const NormalizedSequence& sequence(std::size_t s) const { return (*seqs_)[s]; }
  std::size_t num_sequences() const { return seqs_->size(); }
  const FeatureConfig& feature_config() const { return cfg_; }
  const RegionMap& region_map() const { return rm_; }

  /// Window indices [begin, end) belonging to sequence s.
  std::pair<std::size_t, std::size_t> sequence_range(std::size_t s) const { return {first_[s], first_[s + 1]}; }

  int label(std::size_t i) const { return (*seqs_)[refs_[i].sequence].label.value_or(0); }

  WindowFeatures features(std::size_t i) const {
    const auto& r = refs_[i];
    return extract_window((*seqs_)[r.sequence], r.window, cfg_, rm_);
  }

  Batch batch(const std::vector<std::size_t>& indices) const {
    std::vector<WindowFeatures> feats;
    feats.reserve(indices.size());
    for (auto i : indices) feats.push_back(features(i));
    return Batch::from_windows(feats);
  }

 private:
  const std::vector<NormalizedSequence>* seqs_;
  FeatureConfig cfg_;
  RegionMap rm_;
  std::vector<WindowRef> refs_;
  std::vector<std::size_t> first_;
};

}  // namespace biolip
