#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>

#include "thermoloss/core_types.hpp"

namespace thermoloss {

// Class ids of the 18-region segmentation:
//   0 background        6 left brow        12 neck
//   1 skin              7 right ear        13 hair
//   2 nose              8 left ear         14 beard
//   3 right eye         9 mouth interior   15 clothing
//   4 left eye         10 upper lip        16 glasses
//   5 right brow       11 lower lip        17 headwear / facewear
const std::array<const char*, kNumRegions>& region_names();

// Per-class target values on the unit scale. Entries listed as "below the
// floor" (background, glasses) are stored as exactly 0.
struct ReferenceTemperatureProfile {
  std::string name;
  std::array<double, kNumRegions> targets{};
  std::array<bool, kNumRegions> floor_class{};
  // Source temperatures, kept for serialization; floor classes hold the floor.
  std::array<double, kNumRegions> celsius{};
  double floor_celsius = kDefaultTempFloor;
  double ceil_celsius = kDefaultTempCeil;

  static ReferenceTemperatureProfile cold();
  static ReferenceTemperatureProfile warm();
  static ReferenceTemperatureProfile by_name(const std::string& name);

  // {"name": ..., "floor_celsius": 20, "ceil_celsius": 40,
  //  "temperatures": {"0": "<20", "1": 33, ...}}
  static ReferenceTemperatureProfile from_json_text(const std::string& text);
  static ReferenceTemperatureProfile load(const std::filesystem::path& path);
  std::string to_json_text() const;

  void validate() const;
};

struct RegionStats {
  std::array<double, kNumRegions> mean{};
  std::array<std::size_t, kNumRegions> count{};
  bool present(int label) const { return count[static_cast<std::size_t>(label)] > 0; }
};

RegionStats region_means(const ThermalImage& img, const SegmentationMask& mask);

struct RegionRegResult {
  double value = 0.0;
  Grid grad;
};

// value = sum_i w_i (mean_i - T_i)^2 over present classes, with
// w_i = |S_i| / sum_j |S_j|; d value / d pixel in S_i = 2 w_i (mean_i - T_i) / |S_i|.
// With include_background = false, class 0 neither contributes nor counts
// toward the weight normalization.
RegionRegResult region_reg(const ThermalImage& img, const SegmentationMask& mask,
                           const ReferenceTemperatureProfile& profile,
                           bool include_background = true);

}  // namespace thermoloss
