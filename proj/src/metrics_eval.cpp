#include "thermoloss/metrics_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "thermoloss/error.hpp"
#include "thermoloss/landmark_io.hpp"
#include "thermoloss/landmark_nll.hpp"
#include "thermoloss/parallel.hpp"

namespace thermoloss {

using json = nlohmann::json;

double nme(const LandmarkSet& pred, const LandmarkSet& gt, ImageDims dims,
           const NmeOptions& opts) {
  if (pred.size() != gt.size()) throw DimensionMismatch("nme: landmark counts differ");
  if (gt.size() == 0) throw InvalidArgument("nme: empty landmark set");
  const double W = static_cast<double>(dims.width);
  const double H = static_cast<double>(dims.height);

  double d = 0.0;
  if (opts.mode == NmeMode::kWidthHeight) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (const auto& p : gt.points) {
      x0 = std::min(x0, p.x * W);
      x1 = std::max(x1, p.x * W);
      y0 = std::min(y0, p.y * H);
      y1 = std::max(y1, p.y * H);
    }
    d = ((x1 - x0) + (y1 - y0)) / 2.0;
  } else {
    if (opts.eye_left >= gt.size() || opts.eye_right >= gt.size()) {
      throw InvalidArgument("nme: eye indices outside the landmark set");
    }
    const auto& a = gt.points[opts.eye_left];
    const auto& b = gt.points[opts.eye_right];
    d = std::hypot((a.x - b.x) * W, (a.y - b.y) * H);
  }
  if (!(d > 0.0)) throw InvalidArgument("nme: degenerate normalizer");

  double sum = 0.0;
  for (std::size_t l = 0; l < gt.size(); ++l) {
    const double dx = (pred.points[l].x - gt.points[l].x) * W;
    const double dy = (pred.points[l].y - gt.points[l].y) * H;
    sum += opts.error == PointError::kEuclidean ? std::hypot(dx, dy)
                                                : std::abs(dx) + std::abs(dy);
  }
  return sum / static_cast<double>(gt.size()) / d;
}

EvalReport evaluate_dataset(const std::vector<EvalRecord>& records,
                            std::optional<double> sigma_bar, const NmeOptions& opts) {
  if (records.empty()) throw InvalidArgument("evaluate_dataset: no records");
  EvalReport report;
  report.n_total = records.size();
  report.frames.resize(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& rec = records[i];
    FrameResult& fr = report.frames[i];
    fr.frame = rec.frame;
    if (!rec.prediction) {
      fr.status = FrameStatus::kMissing;
      return;
    }
    const auto& pred = *rec.prediction;
    if (pred.sigmas && !pred.sigmas->empty()) {
      double s = 0.0;
      for (double v : *pred.sigmas) s += v;
      fr.mean_sigma = s / static_cast<double>(pred.sigmas->size());
    }
    if (sigma_bar && !confidence_filter(pred, *sigma_bar)) {
      fr.status = FrameStatus::kRejected;
      return;
    }
    fr.status = FrameStatus::kEvaluated;
    fr.nme = nme(pred, rec.gt, rec.dims, opts);
  });

  double sum = 0.0;
  std::size_t failures = 0;
  for (const auto& fr : report.frames) {
    if (fr.status == FrameStatus::kEvaluated) {
      sum += *fr.nme;
      ++report.n_evaluated;
    } else {
      ++failures;
    }
  }
  report.nme_mean = report.n_evaluated
                        ? sum / static_cast<double>(report.n_evaluated)
                        : std::numeric_limits<double>::quiet_NaN();
  report.failure_rate = static_cast<double>(failures) / static_cast<double>(report.n_total);
  return report;
}

std::vector<EvalRecord> records_from_jsonl(std::string_view text) {
  std::vector<EvalRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      EvalRecord rec;
      rec.frame = j.contains("frame") ? (j.at("frame").is_string()
                                             ? j.at("frame").get<std::string>()
                                             : j.at("frame").dump())
                                      : std::to_string(out.size());
      rec.dims.width = j.at("width").get<std::size_t>();
      rec.dims.height = j.at("height").get<std::size_t>();
      rec.gt = landmarks_from_json(j.at("gt"));
      if (j.contains("pred") && !j.at("pred").is_null()) {
        rec.prediction = landmarks_from_json(j.at("pred"));
      }
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ParseError(ParseErrorKind::kBadValue,
                       "manifest line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(e.kind(), "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string records_to_jsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j = {{"frame", r.frame},
              {"width", r.dims.width},
              {"height", r.dims.height},
              {"gt", landmarks_to_json(r.gt)},
              {"pred", r.prediction ? landmarks_to_json(*r.prediction) : json(nullptr)}};
    out += j.dump() + "\n";
  }
  return out;
}

const char* to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::kEvaluated: return "evaluated";
    case FrameStatus::kMissing: return "missing";
    case FrameStatus::kRejected: return "rejected";
  }
  return "unknown";
}

json report_to_json(const EvalReport& report) {
  json frames = json::array();
  for (const auto& f : report.frames) {
    frames.push_back({{"frame", f.frame},
                      {"status", to_string(f.status)},
                      {"nme", f.nme ? json(*f.nme) : json(nullptr)},
                      {"mean_sigma", f.mean_sigma ? json(*f.mean_sigma) : json(nullptr)}});
  }
  return {{"nme_mean", std::isnan(report.nme_mean) ? json(nullptr) : json(report.nme_mean)},
          {"failure_rate", report.failure_rate},
          {"n_evaluated", report.n_evaluated},
          {"n_total", report.n_total},
          {"frames", frames}};
}

}  // namespace thermoloss
