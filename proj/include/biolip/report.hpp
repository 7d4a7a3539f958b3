#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolip/error.hpp"

// Atomic file output, CSV cells and run manifests.

namespace biolip {

inline constexpr const char* kToolVersion = "0.1.0";

/// Writes through `fill` into path.tmp, then renames over path.
inline void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill,
                         bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::io_failure, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const std::string tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot write " + tmp);
    fill(out);
    out.flush();
    if (!out) throw Error(Errc::io_failure, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io_failure, "cannot rename " + tmp + ": " + ec.message());
}

/// Shortest round-tripping decimal form of a double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// RFC 4180 quoting when the cell holds a separator, quote or newline.
inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + csv_cell(cells[i]);
  return line + "\n";
}

/// One line-delimited JSON record per artifact-producing run.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::json notes = nlohmann::json::object();
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  std::chrono::steady_clock::time_point clock = std::chrono::steady_clock::now();

  nlohmann::json to_json() const {
    const std::time_t t = std::chrono::system_clock::to_time_t(started);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count();
    return {{"command", command}, {"argv", argv},       {"config", config},
            {"seed", seed},       {"inputs", inputs},   {"outputs", outputs},
            {"tool_version", kToolVersion},            {"started_utc", stamp},
            {"wall_seconds", wall}, {"notes", notes}};
  }
};

/// Appends the manifest as one JSON line; the file is replaced atomically.
inline void append_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::string existing;
  if (std::ifstream in(path); in) {
    std::ostringstream s;
    s << in.rdbuf();
    existing = s.str();
    if (!existing.empty() && existing.back() != '\n') existing += '\n';
  }
  write_atomic(path, [&](std::ostream& out) { out << existing << m.to_json().dump() << '\n'; });
}

}  // namespace biolip
