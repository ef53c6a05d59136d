#include "thermoloss/region_regularizer.hpp"

#include <optional>

#include <json.hpp>

#include "thermoloss/error.hpp"
#include "thermoloss/pgm.hpp"

namespace thermoloss {

namespace {

using json = nlohmann::json;

// Celsius per class id; nullopt = below the clamp floor.
using CelsiusTable = std::array<std::optional<double>, kNumRegions>;

constexpr std::nullopt_t kBelowFloor = std::nullopt;

const CelsiusTable& cold_table() {
  static const CelsiusTable t = {kBelowFloor, 33.0, 31.5, 34.0, 34.0, 31.0,
                                 31.0,        32.0, 32.0, 35.0, 32.5, 32.5,
                                 34.0,        30.0, 31.0, 30.0, kBelowFloor, 28.0};
  return t;
}

const CelsiusTable& warm_table() {
  static const CelsiusTable t = {kBelowFloor, 35.0, 35.0, 35.0, 35.0, 34.0,
                                 34.0,        35.0, 35.0, 35.0, 35.0, 35.0,
                                 35.0,        30.0, 32.0, 32.0, kBelowFloor, 28.0};
  return t;
}

ReferenceTemperatureProfile from_table(std::string name, const CelsiusTable& table,
                                       double floor, double ceil) {
  ReferenceTemperatureProfile p;
  p.name = std::move(name);
  p.floor_celsius = floor;
  p.ceil_celsius = ceil;
  for (std::size_t i = 0; i < kNumRegions; ++i) {
    if (table[i]) {
      p.targets[i] = temp_to_unit(*table[i], floor, ceil);
      p.celsius[i] = *table[i];
    } else {
      p.targets[i] = 0.0;
      p.celsius[i] = floor;
      p.floor_class[i] = true;
    }
  }
  return p;
}

}  // namespace

const std::array<const char*, kNumRegions>& region_names() {
  static const std::array<const char*, kNumRegions> names = {
      "background", "skin",       "nose",      "right_eye",      "left_eye",
      "right_brow", "left_brow",  "right_ear", "left_ear",       "mouth_interior",
      "upper_lip",  "lower_lip",  "neck",      "hair",           "beard",
      "clothing",   "glasses",    "headwear_facewear"};
  return names;
}

ReferenceTemperatureProfile ReferenceTemperatureProfile::cold() {
  return from_table("cold", cold_table(), kDefaultTempFloor, kDefaultTempCeil);
}

ReferenceTemperatureProfile ReferenceTemperatureProfile::warm() {
  return from_table("warm", warm_table(), kDefaultTempFloor, kDefaultTempCeil);
}

ReferenceTemperatureProfile ReferenceTemperatureProfile::by_name(const std::string& name) {
  if (name == "cold") return cold();
  if (name == "warm") return warm();
  throw InvalidArgument("unknown profile '" + name + "' (expected cold or warm)");
}

ReferenceTemperatureProfile ReferenceTemperatureProfile::from_json_text(
    const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kMalformedHeader, std::string("profile json: ") + e.what());
  }
  try {
    const double floor = j.value("floor_celsius", kDefaultTempFloor);
    const double ceil = j.value("ceil_celsius", kDefaultTempCeil);
    const auto& temps = j.at("temperatures");
    CelsiusTable table;
    for (std::size_t i = 0; i < kNumRegions; ++i) {
      const auto& entry = temps.at(std::to_string(i));
      if (entry.is_number()) {
        table[i] = entry.get<double>();
      } else if (entry.is_string() && !entry.get<std::string>().empty() &&
                 entry.get<std::string>().front() == '<') {
        table[i] = std::nullopt;
      } else {
        throw InvalidArgument("profile json: class " + std::to_string(i) +
                              " must be a number or a \"<floor\" string");
      }
    }
    if (temps.size() != kNumRegions) {
      throw InvalidArgument("profile json: expected exactly 18 classes");
    }
    auto p = from_table(j.value("name", std::string("custom")), table, floor, ceil);
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, std::string("profile json: ") + e.what());
  }
}

ReferenceTemperatureProfile ReferenceTemperatureProfile::load(
    const std::filesystem::path& path) {
  return from_json_text(read_file_bytes(path));
}

std::string ReferenceTemperatureProfile::to_json_text() const {
  json temps = json::object();
  json labels = json::object();
  for (std::size_t i = 0; i < kNumRegions; ++i) {
    const auto key = std::to_string(i);
    if (floor_class[i]) {
      temps[key] = "<" + json(floor_celsius).dump();
    } else {
      temps[key] = celsius[i];
    }
    labels[key] = region_names()[i];
  }
  json j = {{"name", name},
            {"floor_celsius", floor_celsius},
            {"ceil_celsius", ceil_celsius},
            {"labels", labels},
            {"temperatures", temps}};
  return j.dump(2) + "\n";
}

void ReferenceTemperatureProfile::validate() const {
  for (double t : targets) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("profile: target outside [0, 1]");
  }
}

RegionStats region_means(const ThermalImage& img, const SegmentationMask& mask) {
  if (mask.height != img.height() || mask.width != img.width()) {
    throw DimensionMismatch("region_means: mask shape differs from image");
  }
  mask.validate();
  RegionStats st;
  std::array<double, kNumRegions> sums{};
  for (std::size_t p = 0; p < mask.labels.size(); ++p) {
    const auto l = mask.labels[p];
    sums[l] += img.pixels.values[p];
    ++st.count[l];
  }
  for (std::size_t i = 0; i < kNumRegions; ++i) {
    if (st.count[i]) st.mean[i] = sums[i] / static_cast<double>(st.count[i]);
  }
  return st;
}

RegionRegResult region_reg(const ThermalImage& img, const SegmentationMask& mask,
                           const ReferenceTemperatureProfile& profile,
                           bool include_background) {
  const RegionStats st = region_means(img, mask);
  const std::size_t first = include_background ? 0 : 1;
  std::size_t total = 0;
  for (std::size_t i = first; i < kNumRegions; ++i) total += st.count[i];
  if (total == 0) throw InvalidArgument("region_reg: no class present in the mask");

  RegionRegResult out;
  out.grad = Grid(img.height(), img.width());
  std::array<double, kNumRegions> pixel_grad{};
  for (std::size_t i = first; i < kNumRegions; ++i) {
    if (!st.count[i]) continue;
    const double count = static_cast<double>(st.count[i]);
    const double w = count / static_cast<double>(total);
    const double residual = st.mean[i] - profile.targets[i];
    out.value += w * residual * residual;
    pixel_grad[i] = 2.0 * w * residual / count;
  }
  for (std::size_t p = 0; p < mask.labels.size(); ++p) {
    const auto l = mask.labels[p];
    if (l >= first) out.grad.values[p] = pixel_grad[l];
  }
  return out;
}

}  // namespace thermoloss
