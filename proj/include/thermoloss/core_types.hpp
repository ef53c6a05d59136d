#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thermoloss {

inline constexpr double kDefaultTempFloor = 20.0;
inline constexpr double kDefaultTempCeil = 40.0;
inline constexpr double kPreprocessTempCeil = 45.0;
inline constexpr int kNumRegions = 18;

// Row-major H x W grid of reals. Used for images and for per-pixel gradients,
// which are not range-constrained.
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  double& operator()(std::size_t r, std::size_t c) { return values[r * width + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * width + c];
  }
  bool same_shape(const Grid& other) const noexcept {
    return height == other.height && width == other.width;
  }
};

// Thermal image: unit-interval values linearly mapped from
// [temp_floor, temp_ceil] degrees Celsius.
struct ThermalImage {
  Grid pixels;
  double temp_floor = kDefaultTempFloor;
  double temp_ceil = kDefaultTempCeil;

  ThermalImage() = default;
  ThermalImage(std::size_t h, std::size_t w, double fill = 0.0)
      : pixels(h, w, fill) {}
  explicit ThermalImage(Grid g, double floor = kDefaultTempFloor,
                        double ceil = kDefaultTempCeil);

  std::size_t height() const noexcept { return pixels.height; }
  std::size_t width() const noexcept { return pixels.width; }
  double operator()(std::size_t r, std::size_t c) const { return pixels(r, c); }
  double& operator()(std::size_t r, std::size_t c) { return pixels(r, c); }

  // Throws InvalidArgument when a value leaves [0, 1] or the temperature
  // range is empty.
  void validate() const;
};

struct SegmentationMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  SegmentationMask() = default;
  SegmentationMask(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t operator()(std::size_t r, std::size_t c) const {
    return labels[r * width + c];
  }
  std::uint8_t& operator()(std::size_t r, std::size_t c) {
    return labels[r * width + c];
  }

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Landmarks in normalized image coordinates (x / width, y / height).
struct LandmarkSet {
  std::vector<Point2> points;
  std::optional<std::vector<double>> sigmas;

  std::size_t size() const noexcept { return points.size(); }
  void validate() const;
};

// clamp((t - floor) / (ceil - floor), 0, 1).
double temp_to_unit(double celsius, double floor = kDefaultTempFloor,
                    double ceil = kDefaultTempCeil);
double unit_to_temp(double unit, double floor = kDefaultTempFloor,
                    double ceil = kDefaultTempCeil);

// Re-expresses an image on a new temperature range, clamping.
ThermalImage remap_temperature_range(const ThermalImage& img, double floor,
                                     double ceil);

}  // namespace thermoloss
