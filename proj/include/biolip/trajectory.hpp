#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "biolip/error.hpp"
#include "biolip/region_map.hpp"

namespace biolip {

using Vec3 = std::array<double, 3>;

/// Normalized coordinates of the 64 landmarks of one frame, rows in RegionMap::all_ids() order.
using FrameMatrix = Eigen::Matrix<double, 64, 3>;

inline constexpr double kMinMouthWidth = 1e-6;
inline constexpr double kReferenceFps = 25.0;

struct RawLandmarkFrame {
  std::int64_t frame_index = 0;
  std::optional<double> timestamp_ms;
  std::map<int, Vec3> points;
  bool valid = false;
};

struct TrajectorySequence {
  std::string video_id;
  double fps = kReferenceFps;
  std::optional<int> label;
  std::optional<std::string> generator_tag;
  std::vector<int> landmark_ids;
  std::pair<int, int> commissure_ids{61, 291};
  std::vector<RawLandmarkFrame> frames;
  /// Extra header fields carried through untouched (e.g. perturbation provenance).
  nlohmann::json extra = nlohmann::json::object();
  std::size_t malformed_lines = 0;
};

struct NormalizedSequence {
  std::string video_id;
  double fps = kReferenceFps;
  std::optional<int> label;
  std::optional<std::string> generator_tag;
  std::vector<int> landmark_ids;
  std::pair<int, int> commissure_ids{61, 291};
  std::vector<FrameMatrix> frames;
  /// Normalized left/right commissure positions per frame.
  std::vector<std::array<Vec3, 2>> commissures;
  std::vector<std::int64_t> retained_indices;
  nlohmann::json extra = nlohmann::json::object();

  std::size_t size() const { return frames.size(); }
  bool nonstandard_fps() const { return std::abs(fps - kReferenceFps) > 1e-9; }
};

namespace detail {

inline bool is_finite(const Vec3& p) {
  return std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]);
}

inline std::optional<Vec3> parse_point(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) return std::nullopt;
  Vec3 p{};
  for (std::size_t a = 0; a < 3; ++a) {
    if (!j[a].is_number()) return std::nullopt;
    p[a] = j[a].get<double>();
  }
  if (!is_finite(p)) return std::nullopt;
  return p;
}

inline TrajectorySequence parse_header(const nlohmann::json& h) {
  if (!h.is_object() || h.value("type", std::string{}) != "header")
    throw Error(Errc::malformed_header, "first record is not a header");
  for (const char* key : {"video_id", "fps", "landmark_ids", "commissure_ids"})
    if (!h.contains(key)) throw Error(Errc::missing_required_field, std::string("header.") + key);

  TrajectorySequence seq;
  try {
    seq.video_id = h.at("video_id").get<std::string>();
    seq.fps = h.at("fps").get<double>();
    if (h.contains("label") && !h["label"].is_null()) {
      int label = h["label"].get<int>();
      if (label != 0 && label != 1) throw Error(Errc::malformed_header, "label must be 0, 1 or null");
      seq.label = label;
    }
    if (h.contains("generator") && !h["generator"].is_null())
      seq.generator_tag = h["generator"].get<std::string>();
    seq.landmark_ids = h.at("landmark_ids").get<std::vector<int>>();
    auto c = h.at("commissure_ids").get<std::vector<int>>();
    if (c.size() != 2) throw Error(Errc::malformed_header, "commissure_ids must hold two ids");
    seq.commissure_ids = {c[0], c[1]};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_header, e.what());
  }
  if (!(seq.fps > 0.0) || !std::isfinite(seq.fps)) throw Error(Errc::malformed_header, "fps must be > 0");
  if (seq.landmark_ids.size() < kNumLandmarks)
    throw Error(Errc::malformed_header, "landmark_ids must list at least 64 ids");
  auto has = [&](int id) {
    return std::find(seq.landmark_ids.begin(), seq.landmark_ids.end(), id) != seq.landmark_ids.end();
  };
  if (!has(seq.commissure_ids.first) || !has(seq.commissure_ids.second))
    throw Error(Errc::malformed_header, "commissure ids must appear in landmark_ids");

  for (const auto& [key, value] : h.items()) {
    if (key == "type" || key == "video_id" || key == "fps" || key == "label" || key == "generator" ||
        key == "landmark_ids" || key == "commissure_ids")
      continue;
    seq.extra[key] = value;
  }
  return seq;
}

}  // namespace detail

/// Reads one Landmark JSONL stream. Lines that are not JSON objects of a known
/// record type are skipped and counted in `malformed_lines`.
inline TrajectorySequence parse_trajectory_file(std::istream& in) {
  std::string line;
  nlohmann::json header;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) throw Error(Errc::malformed_header, "header line is not valid JSON");
    have_header = true;
    break;
  }
  if (!have_header) throw Error(Errc::malformed_header, "empty stream");
  TrajectorySequence seq = detail::parse_header(header);

  std::optional<std::int64_t> last_index;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || rec.value("type", std::string{}) != "frame") {
      ++seq.malformed_lines;
      continue;
    }
    if (!rec.contains("i") || !rec["i"].is_number_integer())
      throw Error(Errc::missing_required_field, "frame.i");
    if (!rec.contains("valid") || !rec["valid"].is_boolean())
      throw Error(Errc::missing_required_field, "frame.valid");

    RawLandmarkFrame f;
    f.frame_index = rec["i"].get<std::int64_t>();
    if (f.frame_index < 0) throw Error(Errc::non_monotone_frame_index, "negative frame index");
    if (last_index && f.frame_index <= *last_index)
      throw Error(Errc::non_monotone_frame_index,
                  "frame index " + std::to_string(f.frame_index) + " after " + std::to_string(*last_index));
    last_index = f.frame_index;
    if (rec.contains("t_ms") && rec["t_ms"].is_number()) f.timestamp_ms = rec["t_ms"].get<double>();
    f.valid = rec["valid"].get<bool>();

    const auto pts = rec.contains("pts") ? rec["pts"] : nlohmann::json();
    if (pts.is_array()) {
      for (std::size_t k = 0; k < seq.landmark_ids.size() && k < pts.size(); ++k) {
        if (auto p = detail::parse_point(pts[k])) f.points.emplace(seq.landmark_ids[k], *p);
      }
    }
    if (f.points.size() != seq.landmark_ids.size()) f.valid = false;
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

/// Writes a sequence in Landmark JSONL. Doubles are printed round-trip exact.
inline void write_trajectory_file(std::ostream& out, const TrajectorySequence& seq) {
  nlohmann::json h = nlohmann::json::object();
  h["type"] = "header";
  h["video_id"] = seq.video_id;
  h["fps"] = seq.fps;
  h["label"] = seq.label ? nlohmann::json(*seq.label) : nlohmann::json(nullptr);
  h["generator"] = seq.generator_tag ? nlohmann::json(*seq.generator_tag) : nlohmann::json(nullptr);
  h["landmark_ids"] = seq.landmark_ids;
  h["commissure_ids"] = {seq.commissure_ids.first, seq.commissure_ids.second};
  for (const auto& [key, value] : seq.extra.items()) h[key] = value;
  out << h.dump() << '\n';

  for (const auto& f : seq.frames) {
    nlohmann::json r = nlohmann::json::object();
    r["type"] = "frame";
    r["i"] = f.frame_index;
    r["t_ms"] = f.timestamp_ms ? nlohmann::json(*f.timestamp_ms) : nlohmann::json(nullptr);
    r["valid"] = f.valid;
    auto pts = nlohmann::json::array();
    for (int id : seq.landmark_ids) {
      auto it = f.points.find(id);
      if (it == f.points.end())
        pts.push_back(nullptr);
      else
        pts.push_back({it->second[0], it->second[1], it->second[2]});
    }
    r["pts"] = std::move(pts);
    out << r.dump() << '\n';
  }
}

namespace detail {

struct MouthFrame {
  Vec3 center;
  double width;
};

inline MouthFrame mouth_frame(const RawLandmarkFrame& frame, std::pair<int, int> commissures) {
  auto l = frame.points.find(commissures.first);
  auto r = frame.points.find(commissures.second);
  if (l == frame.points.end() || r == frame.points.end())
    throw Error(Errc::missing_required_field, "commissure landmark missing from frame");
  MouthFrame m{};
  double sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    m.center[a] = (l->second[a] + r->second[a]) / 2.0;
    double d = r->second[a] - l->second[a];
    sq += d * d;
  }
  m.width = std::sqrt(sq);
  return m;
}

inline Vec3 normalize_point(const Vec3& p, const MouthFrame& m) {
  return {(p[0] - m.center[0]) / m.width, (p[1] - m.center[1]) / m.width,
          (p[2] - m.center[2]) / m.width};
}

}  // namespace detail

/// Maps every landmark to (p - c) / w, with c the commissure midpoint and w the
/// commissure distance. Rows follow rm.all_ids().
inline FrameMatrix normalize_frame(const RawLandmarkFrame& frame, const RegionMap& rm) {
  if (!frame.valid) throw Error(Errc::missing_required_field, "frame is not valid");
  const auto m = detail::mouth_frame(frame, rm.commissure_ids());
  if (!(m.width > kMinMouthWidth))
    throw Error(Errc::degenerate_mouth_width, "inter-commissure distance " + std::to_string(m.width));
  FrameMatrix out;
  const auto ids = rm.all_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = frame.points.find(ids[i]);
    if (it == frame.points.end())
      throw Error(Errc::missing_required_field, "landmark " + std::to_string(ids[i]) + " missing from frame");
    const Vec3 q = detail::normalize_point(it->second, m);
    out.row(static_cast<Eigen::Index>(i)) << q[0], q[1], q[2];
  }
  return out;
}

/// Length of the longest run of consecutive original frame indices.
inline std::size_t longest_run(const std::vector<std::int64_t>& indices) {
  std::size_t best = 0, run = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    run = (k > 0 && indices[k] == indices[k - 1] + 1) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

/// Drops invalid and degenerate frames, then rejects the sequence unless some
/// run of consecutive surviving frames is at least `min_valid_run` long.
inline NormalizedSequence filter_sequence(const TrajectorySequence& seq, const RegionMap& rm,
                                          std::size_t min_valid_run = 25) {
  if (min_valid_run < 25) throw Error(Errc::invalid_config, "min_valid_run must be >= 25");
  if (seq.commissure_ids != rm.commissure_ids())
    throw Error(Errc::invalid_config, "file commissure ids differ from region map");
  for (int id : rm.all_ids()) {
    if (std::find(seq.landmark_ids.begin(), seq.landmark_ids.end(), id) == seq.landmark_ids.end())
      throw Error(Errc::missing_required_field, "region map id " + std::to_string(id) + " not exported");
  }

  NormalizedSequence out;
  out.video_id = seq.video_id;
  out.fps = seq.fps;
  out.label = seq.label;
  out.generator_tag = seq.generator_tag;
  out.landmark_ids = rm.all_ids();
  out.commissure_ids = rm.commissure_ids();
  out.extra = seq.extra;

  for (const auto& f : seq.frames) {
    if (!f.valid) continue;
    FrameMatrix m;
    try {
      m = normalize_frame(f, rm);
    } catch (const Error& e) {
      if (e.code() == Errc::degenerate_mouth_width) continue;
      throw;
    }
    const auto mf = detail::mouth_frame(f, rm.commissure_ids());
    out.frames.push_back(m);
    out.commissures.push_back({detail::normalize_point(f.points.at(rm.commissure_ids().first), mf),
                               detail::normalize_point(f.points.at(rm.commissure_ids().second), mf)});
    out.retained_indices.push_back(f.frame_index);
  }
  if (out.frames.empty()) throw Error(Errc::all_frames_invalid, seq.video_id);
  const auto run = longest_run(out.retained_indices);
  if (run < min_valid_run)
    throw Error(Errc::sequence_rejected, seq.video_id + ": longest valid run " + std::to_string(run));
  return out;
}

/// Expresses a normalized sequence as a raw Landmark JSONL sequence (all frames valid).
inline TrajectorySequence to_trajectory(const NormalizedSequence& seq) {
  TrajectorySequence out;
  out.video_id = seq.video_id;
  out.fps = seq.fps;
  out.label = seq.label;
  out.generator_tag = seq.generator_tag;
  out.landmark_ids = seq.landmark_ids;
  out.commissure_ids = seq.commissure_ids;
  out.extra = seq.extra;
  auto contains = [&](int id) {
    return std::find(seq.landmark_ids.begin(), seq.landmark_ids.end(), id) != seq.landmark_ids.end();
  };
  const bool left_external = !contains(seq.commissure_ids.first);
  const bool right_external = !contains(seq.commissure_ids.second);
  if (left_external) out.landmark_ids.push_back(seq.commissure_ids.first);
  if (right_external) out.landmark_ids.push_back(seq.commissure_ids.second);

  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    RawLandmarkFrame f;
    f.frame_index = seq.retained_indices[t];
    f.timestamp_ms = static_cast<double>(f.frame_index) * 1000.0 / seq.fps;
    f.valid = true;
    for (std::size_t i = 0; i < seq.landmark_ids.size(); ++i) {
      const auto& m = seq.frames[t];
      const auto r = static_cast<Eigen::Index>(i);
      f.points[seq.landmark_ids[i]] = {m(r, 0), m(r, 1), m(r, 2)};
    }
    if (left_external) f.points[seq.commissure_ids.first] = seq.commissures[t][0];
    if (right_external) f.points[seq.commissure_ids.second] = seq.commissures[t][1];
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace biolip
