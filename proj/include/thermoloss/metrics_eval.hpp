#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "thermoloss/core_types.hpp"

namespace thermoloss {

enum class NmeMode { kWidthHeight, kInterocular };

// Per-landmark error: Euclidean distance (default) or |dx| + |dy|.
enum class PointError { kEuclidean, kCoordinateL1 };

struct NmeOptions {
  NmeMode mode = NmeMode::kWidthHeight;
  PointError error = PointError::kEuclidean;
  // Outer eye corners of the 68/70-point convention.
  std::size_t eye_left = 36;
  std::size_t eye_right = 45;
};

struct ImageDims {
  std::size_t width = 0;
  std::size_t height = 0;
};

// Mean per-landmark pixel error divided by d, where d is the mean of the
// ground-truth bounding box width and height (kWidthHeight) or the distance
// between the two eye landmarks (kInterocular).
double nme(const LandmarkSet& pred, const LandmarkSet& gt, ImageDims dims,
           const NmeOptions& opts = {});

struct EvalRecord {
  std::string frame;
  std::optional<LandmarkSet> prediction;  // nullopt = detector failure
  LandmarkSet gt;
  ImageDims dims;
};

enum class FrameStatus { kEvaluated, kMissing, kRejected };

struct FrameResult {
  std::string frame;
  FrameStatus status = FrameStatus::kEvaluated;
  std::optional<double> nme;
  std::optional<double> mean_sigma;
};

struct EvalReport {
  double nme_mean = 0.0;  // NaN when nothing was evaluated
  double failure_rate = 0.0;  // fraction in [0, 1]
  std::size_t n_evaluated = 0;
  std::size_t n_total = 0;
  std::vector<FrameResult> frames;
};

// Missing predictions and (when sigma_bar is given) predictions whose mean
// sigma is not below sigma_bar count as failures and are excluded from the
// NME mean.
EvalReport evaluate_dataset(const std::vector<EvalRecord>& records,
                            std::optional<double> sigma_bar, const NmeOptions& opts = {});

// One JSON object per line:
//   {"frame": id, "width": W, "height": H, "gt": {landmarks}, "pred": {landmarks} | null}
std::vector<EvalRecord> records_from_jsonl(std::string_view text);
std::string records_to_jsonl(const std::vector<EvalRecord>& records);

nlohmann::json report_to_json(const EvalReport& report);
const char* to_string(FrameStatus s);

}  // namespace thermoloss
