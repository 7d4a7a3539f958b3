#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolip/binary_io.hpp"
#include "biolip/error.hpp"
#include "biolip/kinematics.hpp"
#include "biolip/network.hpp"
#include "biolip/region_map.hpp"
#include "biolip/training.hpp"

// Checkpoint layout (all integers and reals little-endian):
//   "BIOLIPCK" | u32 version | string config_json
//   u32 n_trainable | n x tensor | u32 n_buffers | n x tensor | i64 step
//   u8 has_training_state [ u32 n | n x (m tensor, v tensor) | string rng | i64 epoch | f64 best_auc | i64 best_epoch ]
// tensor = string name | u8 decay | u64 rows | u64 cols | rows*cols f64 (column-major)
// string = u64 length | bytes

namespace biolip {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  FeatureConfig features;
  RegionMap region_map = RegionMap::default_map();
  std::optional<TrainConfig> train;
  ModelParams params;
  std::optional<TrainingState> state;
};

inline nlohmann::json feature_config_json(const FeatureConfig& f) {
  return {{"window_len", f.window_len}, {"stride", f.stride}, {"axes", f.axes}, {"orders", f.orders}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig f;
  f.window_len = j.value("window_len", f.window_len);
  f.stride = j.value("stride", f.stride);
  if (j.contains("axes")) f.axes = j["axes"].get<std::vector<int>>();
  if (j.contains("orders")) f.orders = j["orders"].get<std::vector<int>>();
  f.validate();
  return f;
}

namespace detail {

inline void put_tensor(std::ostream& out, const std::string& name, bool decay, const MatrixXd& m) {
  binary::put_string(out, name);
  binary::put_u64(out, decay ? 1 : 0, 1);
  binary::put_u64(out, static_cast<std::uint64_t>(m.rows()));
  binary::put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) binary::put_f64(out, m.data()[i]);
}

inline Tensor get_tensor(std::istream& in) {
  Tensor t;
  t.name = binary::get_string(in);
  t.decay = binary::get_u64(in, 1) != 0;
  const auto rows = binary::get_u64(in), cols = binary::get_u64(in);
  if (rows * cols > (std::uint64_t{1} << 28)) throw Error(Errc::bad_checkpoint, "implausible tensor size");
  t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = binary::get_f64(in);
  return t;
}

}  // namespace detail

inline nlohmann::json config_echo(const Checkpoint& c) {
  nlohmann::json j;
  j["model"] = c.model.to_json();
  j["features"] = feature_config_json(c.features);
  j["region_map"] = c.region_map.to_json();
  if (c.train) j["train"] = c.train->to_json();
  return j;
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write("BIOLIPCK", 8);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_string(out, config_echo(c).dump());
  binary::put_u32(out, static_cast<std::uint32_t>(c.params.trainable.size()));
  for (const auto& t : c.params.trainable) detail::put_tensor(out, t.name, t.decay, t.value);
  binary::put_u32(out, static_cast<std::uint32_t>(c.params.buffers.size()));
  for (const auto& t : c.params.buffers) detail::put_tensor(out, t.name, t.decay, t.value);
  binary::put_u64(out, static_cast<std::uint64_t>(c.params.step));
  binary::put_u64(out, c.state ? 1 : 0, 1);
  if (c.state) {
    const auto& s = *c.state;
    binary::put_u32(out, static_cast<std::uint32_t>(s.adam.m.size()));
    for (std::size_t i = 0; i < s.adam.m.size(); ++i) {
      detail::put_tensor(out, "m", false, s.adam.m[i]);
      detail::put_tensor(out, "v", false, s.adam.v[i]);
    }
    binary::put_string(out, s.rng_state);
    binary::put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(s.epoch)));
    binary::put_f64(out, s.best_auc);
    binary::put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(s.best_epoch)));
  }
  if (!out) throw Error(Errc::io_failure, "checkpoint write failed");
}

namespace detail {

inline Checkpoint read_checkpoint_body(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != "BIOLIPCK") throw Error(Errc::bad_checkpoint, "bad magic");
  if (binary::get_u32(in) != kCheckpointVersion) throw Error(Errc::bad_checkpoint, "unsupported version");
  Checkpoint c;
  try {
    const auto j = nlohmann::json::parse(binary::get_string(in));
    c.model = ModelConfig::from_json(j.at("model"));
    c.features = feature_config_from_json(j.at("features"));
    c.region_map = RegionMap::from_json(j.at("region_map"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_checkpoint, std::string("config block: ") + e.what());
  }
  const auto n_trainable = binary::get_u32(in);
  for (std::uint32_t i = 0; i < n_trainable; ++i) c.params.trainable.push_back(detail::get_tensor(in));
  const auto n_buffers = binary::get_u32(in);
  for (std::uint32_t i = 0; i < n_buffers; ++i) c.params.buffers.push_back(detail::get_tensor(in));
  c.params.step = static_cast<std::int64_t>(binary::get_u64(in));
  if (binary::get_u64(in, 1) != 0) {
    TrainingState s;
    const auto n = binary::get_u32(in);
    for (std::uint32_t i = 0; i < n; ++i) {
      s.adam.m.push_back(detail::get_tensor(in).value);
      s.adam.v.push_back(detail::get_tensor(in).value);
    }
    s.rng_state = binary::get_string(in);
    s.epoch = static_cast<int>(static_cast<std::int64_t>(binary::get_u64(in)));
    s.best_auc = binary::get_f64(in);
    s.best_epoch = static_cast<int>(static_cast<std::int64_t>(binary::get_u64(in)));
    c.state = std::move(s);
  }

  const ModelParams expected = make_params(c.model);
  if (expected.trainable.size() != c.params.trainable.size() || expected.buffers.size() != c.params.buffers.size())
    throw Error(Errc::bad_checkpoint, "tensor count does not match the model config");
  for (std::size_t i = 0; i < expected.trainable.size(); ++i) {
    const auto& a = expected.trainable[i];
    const auto& b = c.params.trainable[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      throw Error(Errc::bad_checkpoint, "tensor " + b.name + " does not match the model config");
  }
  return c;
}

}  // namespace detail

/// Reads and validates a checkpoint; truncation and layout errors surface as BadCheckpoint.
inline Checkpoint read_checkpoint(std::istream& in) {
  try {
    return detail::read_checkpoint_body(in);
  } catch (const Error& e) {
    if (e.code() == Errc::io_failure) throw Error(Errc::bad_checkpoint, e.what());
    throw;
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot write " + tmp);
    write_checkpoint(out, c);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace biolip
