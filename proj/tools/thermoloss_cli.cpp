// Command-line front end. Every command writes one JSON document holding the
// command name, the effective configuration and the result.
//
// Exit codes: 0 ok, 2 input error, 3 non-convergence, 1 anything else.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "thermoloss/composite_loss.hpp"
#include "thermoloss/error.hpp"
#include "thermoloss/label_adaptation.hpp"
#include "thermoloss/landmark_io.hpp"
#include "thermoloss/landmark_nll.hpp"
#include "thermoloss/metrics_eval.hpp"
#include "thermoloss/ot.hpp"
#include "thermoloss/pgm.hpp"
#include "thermoloss/preprocess.hpp"
#include "thermoloss/problem_io.hpp"
#include "thermoloss/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace thermoloss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInput = 2;
constexpr int kExitNonConvergence = 3;

// Flags registered with a JSON key. After parsing, flags given on the command
// line are written over the values read from --config.
class Overrides {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key,
                   const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    appliers_.push_back([opt, value, key](json& j) {
      if (opt->count() > 0) set_path(j, key, json(*value));
    });
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, const std::string& key,
                        const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    appliers_.push_back([opt, value, key](json& j) {
      if (opt->count() > 0) set_path(j, key, json(*value));
    });
    return opt;
  }

  void apply(json& j) const {
    for (const auto& f : appliers_) f(j);
  }

 private:
  // "a.b" writes j["a"]["b"].
  static void set_path(json& j, const std::string& key, json v) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      j[key] = std::move(v);
    } else {
      set_path(j[key.substr(0, dot)], key.substr(dot + 1), std::move(v));
    }
  }

  std::vector<std::function<void(json&)>> appliers_;
};

struct Context {
  std::string config_path;
  std::string out_path;
};

json load_config(const Context& ctx) {
  if (ctx.config_path.empty()) return json::object();
  json j = parse_json_file(ctx.config_path);
  if (!j.is_object()) {
    throw ParseError(ParseErrorKind::kBadValue, "--config must hold a JSON object");
  }
  return j;
}

void emit(const Context& ctx, const std::string& command, const json& config,
          const json& result) {
  json doc = {{"command", command},
              {"version", THERMOLOSS_VERSION},
              {"config", config},
              {"result", result}};
  const std::string text = doc.dump(2) + "\n";
  if (ctx.out_path.empty()) {
    std::cout << text;
  } else {
    write_file_bytes(ctx.out_path, text);
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  try {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, "config key '" + key + "': " + e.what());
  }
}

// {"points": [[...], ...]} or a bare list of points; scalars are 1-D points.
EmpiricalMeasure load_measure(const std::string& path) {
  const json j = parse_json_file(path);
  const json& pts = j.is_array() ? j : j.at("points");
  std::vector<std::vector<double>> points;
  try {
    for (const auto& p : pts) {
      if (p.is_number()) {
        points.push_back({p.get<double>()});
      } else {
        points.push_back(p.get<std::vector<double>>());
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadValue, path + ": " + e.what());
  }
  return EmpiricalMeasure::from_points(points);
}

json plan_to_json(const TransportPlan& plan) {
  json rows = json::array();
  for (std::size_t k = 0; k < plan.rows; ++k) {
    json row = json::array();
    for (std::size_t l = 0; l < plan.cols; ++l) row.push_back(plan(k, l));
    rows.push_back(std::move(row));
  }
  return rows;
}

json grid_to_json(const Grid& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.height; ++r) {
    rows.push_back(std::vector<double>(g.values.begin() + static_cast<long>(r * g.width),
                                       g.values.begin() + static_cast<long>((r + 1) * g.width)));
  }
  return rows;
}

SinkhornConfig sinkhorn_config_from(const json& j) {
  SinkhornConfig sc;
  sc.lambda_e = get_or(j, "lambda_e", sc.lambda_e);
  sc.tolerance = get_or(j, "tol", sc.tolerance);
  sc.max_iters = get_or(j, "max_iters", sc.max_iters);
  sc.anneal = get_or(j, "anneal", sc.anneal);
  sc.stage_tolerance = get_or(j, "stage_tolerance", sc.stage_tolerance);
  return sc;
}

json sinkhorn_config_to_json(const SinkhornConfig& sc) {
  return {{"lambda_e", sc.lambda_e},
          {"tol", sc.tolerance},
          {"max_iters", sc.max_iters},
          {"anneal", sc.anneal},
          {"stage_tolerance", sc.stage_tolerance}};
}

// ---------------------------------------------------------------------------
// ot exact | ot sinkhorn

int run_ot(const Context& ctx, bool exact, const std::string& mu_path,
           const std::string& nu_path, const Overrides& ov) {
  json cfg = load_config(ctx);
  ov.apply(cfg);
  const auto mu = load_measure(mu_path);
  const auto nu = load_measure(nu_path);
  json effective = {{"mu", mu_path}, {"nu", nu_path}};
  json result;
  int code = kExitOk;
  if (exact) {
    const auto res = exact_w2_squared(mu, nu);
    result = {{"cost", res.cost}, {"assignment", res.assignment}, {"plan", plan_to_json(res.plan)}};
  } else {
    const auto sc = sinkhorn_config_from(cfg);
    effective.update(sinkhorn_config_to_json(sc));
    const auto res = sinkhorn(mu, nu, sc);
    json stages = json::array();
    for (const auto& s : res.stages) {
      stages.push_back({{"epsilon", s.epsilon},
                        {"cost", s.cost},
                        {"transport_cost", s.transport_cost},
                        {"iterations", s.iterations},
                        {"max_violation", s.max_violation}});
    }
    json grad = json::array();
    const auto g = sinkhorn_grad_source(mu, nu, res.plan);
    for (std::size_t k = 0; k < mu.size(); ++k) {
      grad.push_back(std::vector<double>(g.begin() + static_cast<long>(k * mu.dim()),
                                         g.begin() + static_cast<long>((k + 1) * mu.dim())));
    }
    result = {{"cost", res.cost},
              {"transport_cost", res.transport_cost},
              {"entropy", res.entropy},
              {"converged", res.converged},
              {"iterations", res.iterations},
              {"max_violation", res.max_violation},
              {"plan", plan_to_json(res.plan)},
              {"grad_mu", grad},
              {"stages", stages}};
    if (!res.converged) code = kExitNonConvergence;
  }
  emit(ctx, exact ? "ot exact" : "ot sinkhorn", effective, result);
  return code;
}

// ---------------------------------------------------------------------------
// loss eval / toy-thermalize

LossConfig loss_config_for(const ProblemBundle& bundle, const json& cli_cfg) {
  // Bundle config first, then --config file and flags on top.
  LossConfig cfg = loss_config_from_json(bundle.config);
  return loss_config_from_json(cli_cfg, cfg);
}

void resolve_profile_flag(json& cfg) {
  if (!cfg.contains("profile") || !cfg["profile"].is_string()) return;
  const auto name = cfg["profile"].get<std::string>();
  if (name == "cold" || name == "warm") return;
  cfg["profile"] = parse_json_file(name);
}

double grad_check(const LossProblem& problem, const LossConfig& cfg, const LossResult& base,
                  double step, std::size_t max_coords, std::uint64_t seed) {
  // Flatten (paired gen, unpaired) pixels into one coordinate list.
  struct Coord {
    bool paired;
    std::size_t image;
    std::size_t pixel;
  };
  std::vector<Coord> coords;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < problem.paired.size(); ++i) {
    for (std::size_t p = 0; p < problem.paired[i].gen.pixels.size(); ++p) {
      coords.push_back({true, i, p});
      analytic.push_back(base.paired_grads[i].values[p]);
    }
  }
  for (std::size_t i = 0; i < problem.unpaired.size(); ++i) {
    for (std::size_t p = 0; p < problem.unpaired[i].image.pixels.size(); ++p) {
      coords.push_back({false, i, p});
      analytic.push_back(base.unpaired_grads[i].values[p]);
    }
  }
  std::vector<std::size_t> picked(coords.size());
  for (std::size_t i = 0; i < picked.size(); ++i) picked[i] = i;
  if (max_coords > 0 && max_coords < coords.size()) {
    picked = Rng(seed).sample_without_replacement(coords.size(), max_coords);
  }
  double scale = 1e-8, worst = 0.0;
  std::vector<double> numeric(picked.size());
  LossProblem work = problem;
  for (std::size_t n = 0; n < picked.size(); ++n) {
    const Coord& c = coords[picked[n]];
    double& x = c.paired ? work.paired[c.image].gen.pixels.values[c.pixel]
                         : work.unpaired[c.image].image.pixels.values[c.pixel];
    const double orig = x;
    x = orig + step;
    const double up = rgb2thermal_loss(work, cfg).value;
    x = orig - step;
    const double down = rgb2thermal_loss(work, cfg).value;
    x = orig;
    numeric[n] = (up - down) / (2.0 * step);
    scale = std::max(scale, std::abs(numeric[n]));
  }
  for (std::size_t n = 0; n < picked.size(); ++n) {
    worst = std::max(worst, std::abs(analytic[picked[n]] - numeric[n]));
  }
  return worst / scale;
}

json scales_to_json(const std::vector<ScaleReport>& scales) {
  json out = json::array();
  for (const auto& s : scales) {
    out.push_back({{"scale", s.scale},
                   {"gen_patches", s.gen_patches},
                   {"real_patches", s.real_patches},
                   {"subsample", s.subsample},
                   {"value", s.value},
                   {"skipped", s.skipped},
                   {"converged", s.converged}});
  }
  return out;
}

int run_loss_eval(const Context& ctx, const std::string& problem_dir, const Overrides& ov,
                  bool do_grad_check, double fd_step, std::size_t fd_coords) {
  json cli_cfg = load_config(ctx);
  ov.apply(cli_cfg);
  resolve_profile_flag(cli_cfg);
  const auto bundle = load_problem(problem_dir);
  const LossConfig cfg = loss_config_for(bundle, cli_cfg);
  const auto res = rgb2thermal_loss(bundle.problem, cfg);
  json result = {{"total", res.value},
                 {"breakdown", breakdown_to_json(res.breakdown)},
                 {"converged", res.converged},
                 {"patch_scales", scales_to_json(res.patch_scales)}};
  json effective = loss_config_to_json(cfg);
  effective["problem"] = problem_dir;
  if (do_grad_check) {
    effective["grad_check"] = {{"step", fd_step}, {"coords", fd_coords}};
    result["grad_check_max_rel_error"] =
        grad_check(bundle.problem, cfg, res, fd_step, fd_coords, cfg.patch_cfg.seed);
  }
  emit(ctx, "loss eval", effective, result);
  return res.converged ? kExitOk : kExitNonConvergence;
}

int run_toy(const Context& ctx, const std::string& problem_dir, const std::string& out_dir,
            const Overrides& ov) {
  json cli_cfg = load_config(ctx);
  ov.apply(cli_cfg);
  resolve_profile_flag(cli_cfg);
  const auto bundle = load_problem(problem_dir);
  const LossConfig cfg = loss_config_for(bundle, cli_cfg);
  const auto steps = get_or<std::size_t>(cli_cfg, "steps", 100);
  const double lr = get_or(cli_cfg, "lr", 0.4 * cfg.mse_dim_norm);
  const auto res = toy_thermalize(bundle.problem, cfg, steps, lr);

  json effective = loss_config_to_json(cfg);
  effective["problem"] = problem_dir;
  effective["steps"] = steps;
  effective["lr"] = lr;
  json result = {{"initial", res.trace.front()},
                 {"final", res.trace.back()},
                 {"aborted", res.aborted},
                 {"message", res.message},
                 {"final_breakdown", breakdown_to_json(res.breakdowns.back())},
                 {"trace", res.trace}};
  if (!out_dir.empty()) {
    ProblemBundle out = bundle;
    out.problem = res.optimized;
    out.config = effective;
    save_problem(out, out_dir);
    std::ostringstream csv;
    csv.precision(17);
    csv << "step,total,mse,patch_w,region\n";
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
      const auto& b = res.breakdowns[i];
      csv << i << ',' << res.trace[i] << ',' << b.mse << ',' << b.patch_w << ',' << b.region << '\n';
    }
    write_file_bytes(fs::path(out_dir) / "trace.csv", csv.str());
    result["out_dir"] = out_dir;
  }
  emit(ctx, "toy-thermalize", effective, result);
  return res.aborted ? kExitNonConvergence : kExitOk;
}

// ---------------------------------------------------------------------------
// landmarks pool | nll | plan

int run_pool(const Context& ctx, const std::string& windows_path) {
  const auto wins = windows_from_json(parse_json_file(windows_path));
  const auto pooled = pool_predictions(wins);
  emit(ctx, "landmarks pool", {{"windows", windows_path}}, landmarks_to_json(pooled));
  return kExitOk;
}

int run_nll(const Context& ctx, const std::string& mu_path, const std::string& gt_path,
            const std::string& sigma2_path, const Overrides& ov) {
  json cfg = load_config(ctx);
  ov.apply(cfg);
  NllConfig nc;
  nc.epsilon = get_or(cfg, "epsilon", nc.epsilon);
  const auto mu = load_landmarks(mu_path);
  const auto gt = load_landmarks(gt_path);
  const auto s2 = load_number_list(sigma2_path);
  const auto res = gaussian_nll(mu, s2, gt, nc);
  json gmu = json::array();
  for (const auto& g : res.grad_mu) gmu.push_back({g.x, g.y});
  emit(ctx, "landmarks nll",
       {{"mu", mu_path}, {"gt", gt_path}, {"sigma2", sigma2_path}, {"epsilon", nc.epsilon}},
       {{"value", res.value}, {"grad_mu", gmu}, {"grad_sigma2", res.grad_sigma2}});
  return kExitOk;
}

int run_plan(const Context& ctx, std::size_t h, std::size_t w, const Overrides& ov) {
  json cfg = load_config(ctx);
  ov.apply(cfg);
  WindowPlanConfig pc;
  pc.window = get_or(cfg, "window", pc.window);
  pc.stride = get_or(cfg, "stride", pc.stride);
  pc.scale_factor = get_or(cfg, "scale_factor", pc.scale_factor);
  pc.min_dim_stop = get_or(cfg, "min_dim_stop", pc.min_dim_stop);
  const auto plan = plan_windows(h, w, pc);
  json wins = json::array();
  for (const auto& g : plan) {
    wins.push_back({{"scale_index", g.scale_index},
                    {"scale", g.scale},
                    {"top", g.top},
                    {"left", g.left},
                    {"level_h", g.level_h},
                    {"level_w", g.level_w}});
  }
  emit(ctx, "landmarks plan",
       {{"height", h}, {"width", w}, {"window", pc.window}, {"stride", pc.stride},
        {"scale_factor", pc.scale_factor}, {"min_dim_stop", pc.min_dim_stop}},
       {{"count", plan.size()}, {"windows", wins}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// adapt train | apply

std::vector<AdaptSample> load_adapt_samples(const std::string& path) {
  std::istringstream in(read_file_bytes(path));
  std::vector<AdaptSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      AdaptSample s;
      s.pred = landmarks_from_json(j.at("pred"));
      s.gt = landmarks_from_json(j.at("gt"));
      s.resize = j.value("resize", 1.0);
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(ParseErrorKind::kBadValue,
                       path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

json train_config_to_json(const AdaptTrainConfig& c) {
  return {{"epochs", c.epochs},       {"lr", c.base_lr},
          {"warmup_fraction", c.warmup_fraction},
          {"initial_lr_div", c.initial_lr_div},
          {"final_lr_div", c.final_lr_div},
          {"batch", c.batch},         {"aug_rotation_max", c.aug_rotation_max_deg},
          {"aug_shear_max", c.aug_shear_max},
          {"seed", c.seed}};
}

int run_adapt_train(const Context& ctx, const std::string& data_path,
                    const std::string& model_out, const Overrides& ov) {
  json cfg = load_config(ctx);
  ov.apply(cfg);
  AdaptTrainConfig tc;
  tc.epochs = get_or(cfg, "epochs", tc.epochs);
  tc.base_lr = get_or(cfg, "lr", tc.base_lr);
  tc.batch = get_or(cfg, "batch", tc.batch);
  tc.aug_rotation_max_deg = get_or(cfg, "aug_rotation_max", tc.aug_rotation_max_deg);
  tc.aug_shear_max = get_or(cfg, "aug_shear_max", tc.aug_shear_max);
  tc.seed = get_or(cfg, "seed", tc.seed);
  const auto hidden = get_or<std::size_t>(cfg, "hidden", kAdapterHiddenWidth);
  const auto samples = load_adapt_samples(data_path);
  if (samples.empty()) throw InvalidArgument("adapt train: no samples in " + data_path);

  json effective = train_config_to_json(tc);
  effective["hidden"] = hidden;
  effective["data"] = data_path;
  effective["model_out"] = model_out;
  const auto init = AdapterMLP::for_conventions(samples.front().pred.size(),
                                                samples.front().gt.size(), tc.seed, hidden);
  try {
    const auto res = adapter_train(samples, tc, init);
    save_adapter(res.model, model_out, &tc);
    emit(ctx, "adapt train", effective,
         {{"final_loss", res.loss_trace.empty() ? json(nullptr) : json(res.loss_trace.back())},
          {"train_l1", adapter_mean_l1(res.model, samples)},
          {"parameter_count", res.model.parameter_count()},
          {"loss_trace", res.loss_trace}});
  } catch (const NumericalError& e) {
    emit(ctx, "adapt train", effective, {{"aborted", true}, {"message", e.what()}});
    return kExitNonConvergence;
  }
  return kExitOk;
}

int run_adapt_apply(const Context& ctx, const std::string& model_path,
                    const std::string& pred_path, double resize) {
  const auto mlp = load_adapter(model_path);
  const json j = parse_json_file(pred_path);
  json result;
  if (j.is_array()) {
    result = json::array();
    for (const auto& item : j) {
      const double r = item.value("resize", resize);
      result.push_back(landmarks_to_json(adapter_apply(mlp, landmarks_from_json(item), r)));
    }
  } else {
    result = landmarks_to_json(adapter_apply(mlp, landmarks_from_json(j), j.value("resize", resize)));
  }
  emit(ctx, "adapt apply", {{"model", model_path}, {"pred", pred_path}, {"resize", resize}},
       result);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval nme

int run_eval(const Context& ctx, const std::string& manifest, const Overrides& ov) {
  json cfg = load_config(ctx);
  ov.apply(cfg);
  NmeOptions opts;
  const auto mode = get_or<std::string>(cfg, "mode", "wh");
  if (mode == "wh") {
    opts.mode = NmeMode::kWidthHeight;
  } else if (mode == "interocular") {
    opts.mode = NmeMode::kInterocular;
  } else {
    throw InvalidArgument("--mode must be wh or interocular");
  }
  const auto err = get_or<std::string>(cfg, "error", "euclidean");
  if (err == "euclidean") {
    opts.error = PointError::kEuclidean;
  } else if (err == "l1") {
    opts.error = PointError::kCoordinateL1;
  } else {
    throw InvalidArgument("--error must be euclidean or l1");
  }
  opts.eye_left = get_or(cfg, "eye_left", opts.eye_left);
  opts.eye_right = get_or(cfg, "eye_right", opts.eye_right);
  std::optional<double> sigma_bar;
  if (cfg.contains("sigma_bar") && !cfg["sigma_bar"].is_null()) {
    sigma_bar = get_or(cfg, "sigma_bar", 0.0);
  }
  const auto records = records_from_jsonl(read_file_bytes(manifest));
  const auto report = evaluate_dataset(records, sigma_bar, opts);
  emit(ctx, "eval nme",
       {{"manifest", manifest},
        {"mode", mode},
        {"error", err},
        {"eye_left", opts.eye_left},
        {"eye_right", opts.eye_right},
        {"sigma_bar", sigma_bar ? json(*sigma_bar) : json(nullptr)}},
       report_to_json(report));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// preprocess

int run_preprocess(const Context& ctx, const std::string& input, const std::string& out_dir) {
  const auto img = load_thermal_pgm(input);
  const auto stack = preprocess_stack(img);
  fs::create_directories(out_dir);
  const char* names[] = {"a", "a_inv", "b", "b_inv"};
  json files = json::array();
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto path = fs::path(out_dir) / (std::string(names[i]) + ".pgm");
    save_thermal_pgm(stack[i], path);
    files.push_back(path.string());
  }
  emit(ctx, "preprocess",
       {{"input", input},
        {"temp_ceil", kPreprocessTempCeil},
        {"unsharp_a", {{"radius", kUnsharpA.radius}, {"amount", kUnsharpA.amount}}},
        {"unsharp_b", {{"radius", kUnsharpB.radius}, {"amount", kUnsharpB.amount}}}},
       {{"files", files}});
  return kExitOk;
}

void add_loss_flags(CLI::App* cmd, Overrides& ov) {
  ov.add<std::string>(cmd, "--profile", "profile", "Reference profile: cold, warm or a JSON file");
  ov.add<double>(cmd, "--lambda-w", "lambda_w", "Patch term weight");
  ov.add<double>(cmd, "--lambda-r", "lambda_r", "Region term weight");
  ov.add<double>(cmd, "--mse-norm", "mse_dim_norm", "Paired MSE normalization");
  ov.add<std::string>(cmd, "--backend", "backend", "OT backend: sinkhorn or exact");
  ov.add<std::uint64_t>(cmd, "--seed", "patch.seed", "Patch subsampling seed");
  ov.add<std::size_t>(cmd, "--scales", "patch.scales", "Pyramid levels");
  ov.add<std::size_t>(cmd, "--max-patches", "patch.max_patches_per_side",
                      "Patch subsample cap per side and scale");
  ov.add<double>(cmd, "--lambda-e", "sinkhorn.lambda_e", "Entropic regularization");
  ov.add<double>(cmd, "--tol", "sinkhorn.tolerance", "Sinkhorn marginal tolerance");
  ov.add<std::size_t>(cmd, "--max-iters", "sinkhorn.max_iters", "Sinkhorn iterations per stage");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal loss, landmark and evaluation tools"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  app.add_option("--config", ctx.config_path, "JSON file with settings; flags take precedence");
  app.add_option("--out", ctx.out_path, "Write the JSON result here instead of stdout");
  app.set_version_flag("--version", THERMOLOSS_VERSION);

  std::function<int()> action;

  // ot
  auto* ot = app.add_subcommand("ot", "Optimal transport between point measures");
  ot->require_subcommand(1);
  std::string mu_path, nu_path;
  Overrides ot_ov;
  for (const bool exact : {true, false}) {
    auto* sub = ot->add_subcommand(exact ? "exact" : "sinkhorn",
                                   exact ? "Exact squared 2-Wasserstein via assignment"
                                         : "Entropic OT with log-domain Sinkhorn");
    sub->add_option("--mu", mu_path, "Source measure JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--nu", nu_path, "Target measure JSON")->required()->check(CLI::ExistingFile);
    if (!exact) {
      ot_ov.add<double>(sub, "--lambda-e", "lambda_e", "Entropic regularization (default 1e-6)");
      ot_ov.add<double>(sub, "--tol", "tol", "Marginal tolerance (default 1e-9)");
      ot_ov.add<std::size_t>(sub, "--max-iters", "max_iters", "Iterations per stage (default 10000)");
      ot_ov.add<bool>(sub, "--anneal", "anneal", "Epsilon scaling on/off (default true)");
    }
    sub->callback([&, exact] { action = [&, exact] { return run_ot(ctx, exact, mu_path, nu_path, ot_ov); }; });
  }

  // loss eval
  auto* loss = app.add_subcommand("loss", "Composite thermalization loss");
  loss->require_subcommand(1);
  auto* loss_eval = loss->add_subcommand("eval", "Evaluate the loss on a problem directory");
  std::string problem_dir;
  bool grad_check_flag = false;
  double fd_step = 1e-4;
  std::size_t fd_coords = 0;
  Overrides loss_ov;
  loss_eval->add_option("--problem", problem_dir, "Problem directory")->required();
  add_loss_flags(loss_eval, loss_ov);
  loss_eval->add_flag("--grad-check", grad_check_flag, "Compare gradients with central differences");
  loss_eval->add_option("--fd-step", fd_step, "Finite-difference step (default 1e-4)");
  loss_eval->add_option("--fd-coords", fd_coords, "Check this many random pixels (0 = all)");
  loss_eval->callback([&] {
    action = [&] { return run_loss_eval(ctx, problem_dir, loss_ov, grad_check_flag, fd_step, fd_coords); };
  });

  // toy-thermalize
  auto* toy = app.add_subcommand("toy-thermalize", "Projected gradient descent on image pixels");
  std::string toy_out_dir;
  Overrides toy_ov;
  toy->add_option("--problem", problem_dir, "Problem directory")->required();
  toy->add_option("--out-dir", toy_out_dir, "Write optimized images and trace.csv here");
  toy_ov.add<std::size_t>(toy, "--steps", "steps", "Descent steps (default 100)");
  toy_ov.add<double>(toy, "--lr", "lr", "Step size (default 0.4 * mse_dim_norm)");
  add_loss_flags(toy, toy_ov);
  toy->callback([&] { action = [&] { return run_toy(ctx, problem_dir, toy_out_dir, toy_ov); }; });

  // landmarks
  auto* lm = app.add_subcommand("landmarks", "Sliding-window pooling and Gaussian NLL");
  lm->require_subcommand(1);
  std::string windows_path, gt_path, sigma2_path, lm_mu_path;
  auto* pool = lm->add_subcommand("pool", "Pool window predictions by minimum sigma");
  pool->add_option("--windows", windows_path, "Window predictions JSON")->required()->check(CLI::ExistingFile);
  pool->callback([&] { action = [&] { return run_pool(ctx, windows_path); }; });
  auto* nll = lm->add_subcommand("nll", "Gaussian negative log-likelihood and gradients");
  Overrides nll_ov;
  nll->add_option("--mu", lm_mu_path, "Predicted landmarks JSON")->required()->check(CLI::ExistingFile);
  nll->add_option("--gt", gt_path, "Ground-truth landmarks JSON")->required()->check(CLI::ExistingFile);
  nll->add_option("--sigma2", sigma2_path, "Variances JSON list")->required()->check(CLI::ExistingFile);
  nll_ov.add<double>(nll, "--epsilon", "epsilon", "Variance floor (default 1e-6)");
  nll->callback([&] { action = [&] { return run_nll(ctx, lm_mu_path, gt_path, sigma2_path, nll_ov); }; });
  auto* plan = lm->add_subcommand("plan", "List the sliding windows for an image size");
  std::size_t plan_h = 0, plan_w = 0;
  Overrides plan_ov;
  plan->add_option("--height", plan_h, "Image height")->required();
  plan->add_option("--width", plan_w, "Image width")->required();
  plan_ov.add<std::size_t>(plan, "--window", "window", "Window side (default 224)");
  plan_ov.add<std::size_t>(plan, "--stride", "stride", "Window stride (default 20)");
  plan_ov.add<double>(plan, "--scale-factor", "scale_factor", "Pyramid factor (default 0.75)");
  plan->callback([&] { action = [&] { return run_plan(ctx, plan_h, plan_w, plan_ov); }; });

  // adapt
  auto* adapt = app.add_subcommand("adapt", "Landmark convention adapter");
  adapt->require_subcommand(1);
  auto* train = adapt->add_subcommand("train", "Train an adapter on JSONL pairs");
  std::string data_path, model_path, pred_path;
  double resize = 1.0;
  Overrides train_ov;
  train->add_option("--data", data_path, "JSONL with {pred, gt, resize} per line")->required()->check(CLI::ExistingFile);
  train->add_option("--model-out", model_path, "Where to write the trained model")->required();
  train_ov.add<std::size_t>(train, "--epochs", "epochs", "Epochs (default 2000)");
  train_ov.add<double>(train, "--lr", "lr", "Peak learning rate (default 0.002)");
  train_ov.add<std::size_t>(train, "--batch", "batch", "Batch size (default 64)");
  train_ov.add<double>(train, "--aug-rotation", "aug_rotation_max", "Max rotation in degrees (default 45)");
  train_ov.add<double>(train, "--aug-shear", "aug_shear_max", "Max shear (default 0.2)");
  train_ov.add<std::size_t>(train, "--hidden", "hidden", "Hidden layer width (default 256)");
  train_ov.add<std::uint64_t>(train, "--seed", "seed", "Seed for init, shuffling and augmentation");
  train->callback([&] { action = [&] { return run_adapt_train(ctx, data_path, model_path, train_ov); }; });
  auto* apply = adapt->add_subcommand("apply", "Map landmarks with a trained adapter");
  apply->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  apply->add_option("--pred", pred_path, "Landmarks JSON (object or list)")->required()->check(CLI::ExistingFile);
  apply->add_option("--resize", resize, "Resize factor when the input omits one (default 1)");
  apply->callback([&] { action = [&] { return run_adapt_apply(ctx, model_path, pred_path, resize); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "Benchmark metrics");
  ev->require_subcommand(1);
  auto* ev_nme = ev->add_subcommand("nme", "NME and failure rate over a JSONL manifest");
  std::string manifest;
  Overrides eval_ov;
  ev_nme->add_option("--manifest", manifest, "JSONL manifest")->required()->check(CLI::ExistingFile);
  eval_ov.add<double>(ev_nme, "--sigma-bar", "sigma_bar", "Reject frames with mean sigma >= this");
  eval_ov.add<std::string>(ev_nme, "--mode", "mode", "Normalizer: wh or interocular (default wh)");
  eval_ov.add<std::string>(ev_nme, "--error", "error", "Point error: euclidean or l1 (default euclidean)");
  eval_ov.add<std::size_t>(ev_nme, "--eye-left", "eye_left", "Interocular index (default 36)");
  eval_ov.add<std::size_t>(ev_nme, "--eye-right", "eye_right", "Interocular index (default 45)");
  ev_nme->callback([&] { action = [&] { return run_eval(ctx, manifest, eval_ov); }; });

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Four-channel unsharp-mask stack of a thermal PGM");
  std::string pre_in, pre_out;
  pre->add_option("--input", pre_in, "Thermal PGM")->required()->check(CLI::ExistingFile);
  pre->add_option("--out-dir", pre_out, "Output directory")->required();
  pre->callback([&] { action = [&] { return run_preprocess(ctx, pre_in, pre_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    return action ? action() : kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionMismatch& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Unsupported& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
