#include "thermoloss/landmark_io.hpp"

#include "thermoloss/error.hpp"
#include "thermoloss/pgm.hpp"

namespace thermoloss {

using json = nlohmann::json;

json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file_bytes(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, path.string() + ": " + e.what());
  }
}

LandmarkSet landmarks_from_json(const json& j) {
  LandmarkSet lm;
  try {
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) {
        throw ParseError(ParseErrorKind::kBadValue, "landmarks: each point must be [x, y]");
      }
      lm.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (j.contains("sigmas") && !j.at("sigmas").is_null()) {
      lm.sigmas = j.at("sigmas").get<std::vector<double>>();
    }
    if (j.contains("convention_size") &&
        j.at("convention_size").get<std::size_t>() != lm.points.size()) {
      throw ParseError(ParseErrorKind::kBadValue, "landmarks: convention_size differs from point count");
    }
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, std::string("landmarks: ") + e.what());
  }
  lm.validate();
  return lm;
}

json landmarks_to_json(const LandmarkSet& lm) {
  json pts = json::array();
  for (const auto& p : lm.points) pts.push_back({p.x, p.y});
  json j = {{"convention_size", lm.points.size()}, {"points", pts}};
  if (lm.sigmas) j["sigmas"] = *lm.sigmas;
  return j;
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
  return landmarks_from_json(parse_json_file(path));
}

std::vector<double> load_number_list(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  try {
    if (j.is_array()) return j.get<std::vector<double>>();
    return j.at("values").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, path.string() + ": " + e.what());
  }
}

std::vector<WindowPrediction> windows_from_json(const json& j) {
  std::vector<WindowPrediction> out;
  try {
    const auto image_h = j.at("image_height").get<std::size_t>();
    const auto image_w = j.at("image_width").get<std::size_t>();
    const auto window = j.value("window", std::size_t{224});
    for (const auto& w : j.at("windows")) {
      WindowPrediction wp;
      auto& g = wp.geometry;
      g.scale_index = w.value("scale_index", std::size_t{0});
      g.scale = w.at("scale").get<double>();
      g.top = w.at("top").get<std::size_t>();
      g.left = w.at("left").get<std::size_t>();
      g.window_h = w.value("window_h", window);
      g.window_w = w.value("window_w", window);
      g.image_h = image_h;
      g.image_w = image_w;
      g.level_h = static_cast<std::size_t>(static_cast<double>(image_h) * g.scale);
      g.level_w = static_cast<std::size_t>(static_cast<double>(image_w) * g.scale);
      if (!(g.scale > 0.0)) throw ParseError(ParseErrorKind::kBadValue, "windows: scale must be positive");
      for (const auto& p : w.at("points")) {
        wp.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      wp.sigmas = w.at("sigmas").get<std::vector<double>>();
      out.push_back(std::move(wp));
    }
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, std::string("windows: ") + e.what());
  }
  return out;
}

}  // namespace thermoloss
