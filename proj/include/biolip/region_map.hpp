#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolip/error.hpp"

namespace biolip {

enum class Region : int { lower_inner = 0, lower_outer = 1, upper = 2, perioral = 3 };

inline constexpr std::array<const char*, 4> kRegionNames = {"lower_inner", "lower_outer", "upper",
                                                            "perioral"};
inline constexpr std::array<std::size_t, 4> kRegionSizes = {9, 9, 22, 24};
inline constexpr std::size_t kNumLandmarks = 64;

/// Assignment of the 64 perioral landmark ids to the four anatomical regions,
/// plus the two mouth-corner ids that define the normalization frame.
class RegionMap {
 public:
  RegionMap(std::pair<int, int> commissures, std::array<std::vector<int>, 4> regions)
      : commissures_(commissures), regions_(std::move(regions)) {
    validate();
  }

  /// Best-effort reconstruction following the upstream face-mesh lips
  /// topology. Default only; override per deployment with a config file.
  static RegionMap default_map() {
    return RegionMap({61, 291},
                     {{
                         {95, 88, 178, 87, 14, 317, 402, 318, 324},
                         {146, 91, 181, 84, 17, 314, 405, 321, 375},
                         {61, 185, 40, 39, 37, 0, 267, 269, 270, 409, 291, 78, 191, 80, 81, 82, 13,
                          312, 311, 310, 415, 308},
                         {57, 43, 106, 182, 83, 18, 313, 406, 335, 273, 287, 410, 322, 391, 393,
                          164, 167, 165, 92, 186, 216, 436, 202, 422},
                     }});
  }

  static RegionMap from_json(const nlohmann::json& j) {
    try {
      auto c = j.at("commissure_ids").get<std::vector<int>>();
      if (c.size() != 2) throw Error(Errc::invalid_config, "commissure_ids must hold two ids");
      std::array<std::vector<int>, 4> regions;
      for (std::size_t r = 0; r < 4; ++r) regions[r] = j.at(kRegionNames[r]).get<std::vector<int>>();
      return RegionMap({c[0], c[1]}, std::move(regions));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_config, std::string("region map: ") + e.what());
    }
  }

  static RegionMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot open region map " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_config, "region map " + path + ": " + e.what());
    }
    return from_json(j);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["commissure_ids"] = {commissures_.first, commissures_.second};
    for (std::size_t r = 0; r < 4; ++r) j[kRegionNames[r]] = regions_[r];
    return j;
  }

  std::pair<int, int> commissure_ids() const { return commissures_; }
  const std::vector<int>& ids(Region r) const { return regions_[static_cast<int>(r)]; }

  std::optional<Region> region_of(int id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(int id) const { return lookup_.count(id) != 0; }

  /// The 64 ids in region order.
  std::vector<int> all_ids() const {
    std::vector<int> out;
    for (const auto& r : regions_) out.insert(out.end(), r.begin(), r.end());
    return out;
  }

  bool commissures_internal() const {
    return contains(commissures_.first) && contains(commissures_.second);
  }

 private:
  void validate() {
    lookup_.clear();
    for (std::size_t r = 0; r < 4; ++r) {
      if (regions_[r].size() != kRegionSizes[r])
        throw Error(Errc::invalid_config, std::string("region ") + kRegionNames[r] + " must have " +
                                              std::to_string(kRegionSizes[r]) + " ids");
      for (int id : regions_[r]) {
        if (!lookup_.emplace(id, static_cast<Region>(r)).second)
          throw Error(Errc::invalid_config, "landmark id " + std::to_string(id) + " assigned twice");
      }
    }
    if (commissures_.first == commissures_.second)
      throw Error(Errc::invalid_config, "commissure ids must differ");
  }

  std::pair<int, int> commissures_;
  std::array<std::vector<int>, 4> regions_;
  std::map<int, Region> lookup_;
};

}  // namespace biolip
