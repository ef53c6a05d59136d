#pragma once

#include <filesystem>

#include <json.hpp>

#include "thermoloss/core_types.hpp"
#include "thermoloss/landmark_nll.hpp"

namespace thermoloss {

// {"convention_size": n, "points": [[x, y], ...], "sigmas": [...]}
// "sigmas" is optional; convention_size must equal the point count.
LandmarkSet landmarks_from_json(const nlohmann::json& j);
nlohmann::json landmarks_to_json(const LandmarkSet& lm);
LandmarkSet load_landmarks(const std::filesystem::path& path);

// Either a bare array of numbers or {"values": [...]}.
std::vector<double> load_number_list(const std::filesystem::path& path);

// {"image_height": H, "image_width": W, "window": 224,
//  "windows": [{"scale_index": k, "scale": s, "top": t, "left": l,
//               "points": [[x, y], ...], "sigmas": [...]}, ...]}
std::vector<WindowPrediction> windows_from_json(const nlohmann::json& j);

nlohmann::json parse_json_file(const std::filesystem::path& path);

}  // namespace thermoloss
