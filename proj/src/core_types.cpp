#include "thermoloss/core_types.hpp"

#include <algorithm>
#include <cmath>

#include "thermoloss/error.hpp"

namespace thermoloss {

ThermalImage::ThermalImage(Grid g, double floor, double ceil)
    : pixels(std::move(g)), temp_floor(floor), temp_ceil(ceil) {
  validate();
}

void ThermalImage::validate() const {
  if (!(temp_floor < temp_ceil)) {
    throw InvalidArgument("ThermalImage: temp_floor must be below temp_ceil");
  }
  if (pixels.values.size() != pixels.height * pixels.width) {
    throw DimensionMismatch("ThermalImage: value count does not match shape");
  }
  for (double v : pixels.values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("ThermalImage: value outside [0, 1]");
    }
  }
}

void SegmentationMask::validate() const {
  if (labels.size() != height * width) {
    throw DimensionMismatch("SegmentationMask: label count does not match shape");
  }
  for (auto l : labels) {
    if (l >= kNumRegions) {
      throw InvalidArgument("SegmentationMask: label outside [0, 17]");
    }
  }
}

void LandmarkSet::validate() const {
  if (sigmas && sigmas->size() != points.size()) {
    throw DimensionMismatch("LandmarkSet: sigmas length differs from points");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidArgument("LandmarkSet: non-finite coordinate");
    }
  }
  if (sigmas) {
    for (double s : *sigmas) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw InvalidArgument("LandmarkSet: sigma must be finite and >= 0");
      }
    }
  }
}

double temp_to_unit(double celsius, double floor, double ceil) {
  if (!std::isfinite(celsius)) throw InvalidArgument("temp_to_unit: non-finite temperature");
  if (!(floor < ceil)) throw InvalidArgument("temp_to_unit: floor must be below ceil");
  return std::clamp((celsius - floor) / (ceil - floor), 0.0, 1.0);
}

double unit_to_temp(double unit, double floor, double ceil) {
  if (!std::isfinite(unit)) throw InvalidArgument("unit_to_temp: non-finite value");
  if (!(floor < ceil)) throw InvalidArgument("unit_to_temp: floor must be below ceil");
  return floor + unit * (ceil - floor);
}

ThermalImage remap_temperature_range(const ThermalImage& img, double floor,
                                     double ceil) {
  ThermalImage out(img.height(), img.width());
  out.temp_floor = floor;
  out.temp_ceil = ceil;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double t = unit_to_temp(img.pixels.values[i], img.temp_floor, img.temp_ceil);
    out.pixels.values[i] = temp_to_unit(t, floor, ceil);
  }
  return out;
}

}  // namespace thermoloss
