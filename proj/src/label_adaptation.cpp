#include "thermoloss/label_adaptation.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "thermoloss/error.hpp"
#include "thermoloss/pgm.hpp"
#include "thermoloss/rng.hpp"

namespace thermoloss {

using json = nlohmann::json;

AdapterMLP AdapterMLP::with_widths(std::vector<std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw InvalidArgument("AdapterMLP: need at least two widths");
  for (auto w : widths) {
    if (w == 0) throw InvalidArgument("AdapterMLP: zero layer width");
  }
  AdapterMLP m;
  m.widths = std::move(widths);
  m.seed = seed;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < m.widths.size(); ++k) {
    const auto in = static_cast<Eigen::Index>(m.widths[k]);
    const auto out = static_cast<Eigen::Index>(m.widths[k + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd W(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) W(r, c) = rng.uniform(-bound, bound);
    Eigen::VectorXd b(out);
    for (Eigen::Index r = 0; r < out; ++r) b(r) = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(W));
    m.biases.push_back(std::move(b));
  }
  return m;
}

AdapterMLP AdapterMLP::for_conventions(std::size_t in_landmarks, std::size_t out_landmarks,
                                       std::uint64_t seed, std::size_t hidden) {
  return with_widths({2 * in_landmarks + 1, hidden, hidden, hidden, hidden, 2 * out_landmarks},
                     seed);
}

std::size_t AdapterMLP::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
  }
  return n;
}

std::vector<double> AdapterMLP::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const auto& W = weights[k];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) out.push_back(W(r, c));
    for (Eigen::Index r = 0; r < biases[k].size(); ++r) out.push_back(biases[k](r));
  }
  return out;
}

void AdapterMLP::set_flat_parameters(std::span<const double> params) {
  if (params.size() != parameter_count()) {
    throw DimensionMismatch("AdapterMLP: parameter count mismatch");
  }
  std::size_t i = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    auto& W = weights[k];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = params[i++];
    for (Eigen::Index r = 0; r < biases[k].size(); ++r) biases[k](r) = params[i++];
  }
}

void AdapterMLP::validate() const {
  if (widths.size() < 2 || weights.size() + 1 != widths.size() ||
      biases.size() != weights.size()) {
    throw InvalidArgument("AdapterMLP: inconsistent layer count");
  }
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (static_cast<std::size_t>(weights[k].rows()) != widths[k + 1] ||
        static_cast<std::size_t>(weights[k].cols()) != widths[k] ||
        static_cast<std::size_t>(biases[k].size()) != widths[k + 1]) {
      throw InvalidArgument("AdapterMLP: width chain inconsistent");
    }
    if (!weights[k].allFinite() || !biases[k].allFinite()) {
      throw InvalidArgument("AdapterMLP: non-finite parameter");
    }
  }
}

namespace {

struct Activations {
  std::vector<Eigen::MatrixXd> pre;   // z_k, k = 0..layers-1
  std::vector<Eigen::MatrixXd> post;  // a_k; post[0] = input
};

void forward_cached(const AdapterMLP& mlp, const Eigen::MatrixXd& inputs, Activations& act) {
  const std::size_t layers = mlp.weights.size();
  act.pre.resize(layers);
  act.post.resize(layers + 1);
  act.post[0] = inputs;
  for (std::size_t k = 0; k < layers; ++k) {
    act.pre[k].noalias() = mlp.weights[k] * act.post[k];
    act.pre[k].colwise() += mlp.biases[k];
    if (k + 1 < layers) {
      act.post[k + 1] = act.pre[k].cwiseMax(0.0);
    } else {
      act.post[k + 1] = act.pre[k];
    }
  }
}

}  // namespace

Eigen::MatrixXd adapter_forward_batch(const AdapterMLP& mlp, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != mlp.input_size()) {
    throw DimensionMismatch("adapter_forward: input width does not match layer 0");
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
    Eigen::MatrixXd z = mlp.weights[k] * a;
    z.colwise() += mlp.biases[k];
    a = (k + 1 < mlp.weights.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

std::vector<double> adapter_forward(const AdapterMLP& mlp, std::span<const double> input) {
  if (input.size() != mlp.input_size()) {
    throw DimensionMismatch("adapter_forward: input width does not match layer 0");
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = input[i];
  const Eigen::MatrixXd y = adapter_forward_batch(mlp, x);
  return {y.data(), y.data() + y.size()};
}

std::vector<double> adapter_input(const LandmarkSet& pred, double resize) {
  std::vector<double> in;
  in.reserve(2 * pred.size() + 1);
  for (const auto& p : pred.points) {
    in.push_back(p.x);
    in.push_back(p.y);
  }
  in.push_back(resize);
  return in;
}

LandmarkSet adapter_apply(const AdapterMLP& mlp, const LandmarkSet& pred, double resize) {
  const auto out = adapter_forward(mlp, adapter_input(pred, resize));
  if (out.size() % 2 != 0) throw DimensionMismatch("adapter_apply: odd output width");
  LandmarkSet lm;
  for (std::size_t i = 0; i < out.size(); i += 2) lm.points.push_back({out[i], out[i + 1]});
  return lm;
}

std::vector<double> AdapterGradients::flat() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (Eigen::Index r = 0; r < weights[k].rows(); ++r)
      for (Eigen::Index c = 0; c < weights[k].cols(); ++c) out.push_back(weights[k](r, c));
    for (Eigen::Index r = 0; r < biases[k].size(); ++r) out.push_back(biases[k](r));
  }
  return out;
}

namespace {

double loss_with_cache(const AdapterMLP& mlp, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets, Activations& act,
                       AdapterGradients* grads) {
  forward_cached(mlp, inputs, act);
  const Eigen::MatrixXd& out = act.post.back();
  if (out.rows() != targets.rows() || out.cols() != targets.cols()) {
    throw DimensionMismatch("adapter loss: target shape differs from output");
  }
  const double count = static_cast<double>(out.size());
  const Eigen::MatrixXd diff = out - targets;
  const double loss = diff.cwiseAbs().sum() / count;
  if (!grads) return loss;

  const std::size_t layers = mlp.weights.size();
  grads->weights.resize(layers);
  grads->biases.resize(layers);
  Eigen::MatrixXd delta =
      diff.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }) / count;
  for (std::size_t k = layers; k-- > 0;) {
    grads->weights[k].noalias() = delta * act.post[k].transpose();
    grads->biases[k] = delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd back = mlp.weights[k].transpose() * delta;
    delta = back.cwiseProduct(
        act.pre[k - 1].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  }
  return loss;
}

Eigen::MatrixXd stack_inputs(const std::vector<AdaptSample>& samples,
                             const std::vector<std::size_t>& idx) {
  const auto rows = static_cast<Eigen::Index>(2 * samples[idx.front()].pred.size() + 1);
  Eigen::MatrixXd X(rows, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto in = adapter_input(samples[idx[j]].pred, samples[idx[j]].resize);
    for (Eigen::Index r = 0; r < rows; ++r) X(r, static_cast<Eigen::Index>(j)) = in[r];
  }
  return X;
}

Eigen::MatrixXd stack_targets(const std::vector<AdaptSample>& samples,
                              const std::vector<std::size_t>& idx) {
  const auto rows = static_cast<Eigen::Index>(2 * samples[idx.front()].gt.size());
  Eigen::MatrixXd Y(rows, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto& pts = samples[idx[j]].gt.points;
    for (std::size_t l = 0; l < pts.size(); ++l) {
      Y(static_cast<Eigen::Index>(2 * l), static_cast<Eigen::Index>(j)) = pts[l].x;
      Y(static_cast<Eigen::Index>(2 * l + 1), static_cast<Eigen::Index>(j)) = pts[l].y;
    }
  }
  return Y;
}

void check_samples(const std::vector<AdaptSample>& samples, const AdapterMLP& mlp) {
  if (samples.empty()) throw InvalidArgument("adapter: no training samples");
  const std::size_t lin = samples.front().pred.size(), lout = samples.front().gt.size();
  for (const auto& s : samples) {
    if (s.pred.size() != lin || s.gt.size() != lout) {
      throw DimensionMismatch("adapter: samples use inconsistent conventions");
    }
  }
  if (2 * lin + 1 != mlp.input_size() || 2 * lout != mlp.output_size()) {
    throw DimensionMismatch("adapter: network widths do not match the sample conventions");
  }
}

}  // namespace

double adapter_l1_loss(const AdapterMLP& mlp, const Eigen::MatrixXd& inputs,
                       const Eigen::MatrixXd& targets, AdapterGradients* grads) {
  if (static_cast<std::size_t>(inputs.rows()) != mlp.input_size()) {
    throw DimensionMismatch("adapter loss: input width does not match layer 0");
  }
  Activations act;
  return loss_with_cache(mlp, inputs, targets, act, grads);
}

void AdaptTrainConfig::validate() const {
  if (batch < 1) throw InvalidArgument("AdaptTrainConfig: batch must be >= 1");
  if (!(base_lr > 0.0)) throw InvalidArgument("AdaptTrainConfig: base_lr must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw InvalidArgument("AdaptTrainConfig: warmup_fraction must lie in [0, 1)");
  }
  if (!(initial_lr_div >= 1.0) || !(final_lr_div >= 1.0)) {
    throw InvalidArgument("AdaptTrainConfig: lr divisors must be >= 1");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("AdaptTrainConfig: betas must lie in [0, 1)");
  }
  if (!(aug_rotation_max_deg >= 0.0) || !(aug_shear_max >= 0.0)) {
    throw InvalidArgument("AdaptTrainConfig: augmentation ranges must be >= 0");
  }
}

double one_cycle_lr(const AdaptTrainConfig& cfg, std::size_t t, std::size_t total_steps) {
  const double start = cfg.base_lr / cfg.initial_lr_div;
  const double end = cfg.base_lr / cfg.final_lr_div;
  const auto warmup = static_cast<std::size_t>(
      std::floor(cfg.warmup_fraction * static_cast<double>(total_steps)));
  if (t < warmup) {
    return start + (cfg.base_lr - start) * static_cast<double>(t) / static_cast<double>(warmup);
  }
  const std::size_t decay = total_steps - warmup;
  if (decay <= 1) return cfg.base_lr;
  const double progress =
      static_cast<double>(t - warmup) / static_cast<double>(decay - 1);
  return end + (cfg.base_lr - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdaptSample augment_sample(const AdaptSample& s, double angle_rad, double shear) {
  if (angle_rad == 0.0 && shear == 0.0) return s;
  double cx = 0.0, cy = 0.0;
  for (const auto& p : s.pred.points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(s.pred.size());
  cy /= static_cast<double>(s.pred.size());
  const double c = std::cos(angle_rad), sn = std::sin(angle_rad);
  // A = R(angle) * [[1, shear], [0, 1]]
  const double a00 = c, a01 = c * shear - sn, a10 = sn, a11 = sn * shear + c;
  auto map = [&](std::vector<Point2>& pts) {
    for (auto& p : pts) {
      const double dx = p.x - cx, dy = p.y - cy;
      p = {cx + a00 * dx + a01 * dy, cy + a10 * dx + a11 * dy};
    }
  };
  AdaptSample out = s;
  map(out.pred.points);
  map(out.gt.points);
  return out;
}

AdaptTrainResult adapter_train(const std::vector<AdaptSample>& samples,
                               const AdaptTrainConfig& cfg, const AdapterMLP& init) {
  cfg.validate();
  init.validate();
  check_samples(samples, init);
  AdaptTrainResult res{init, {}};
  if (cfg.epochs == 0) return res;

  AdapterMLP& mlp = res.model;
  const std::size_t layers = mlp.weights.size();
  std::vector<Eigen::MatrixXd> mW(layers), vW(layers);
  std::vector<Eigen::VectorXd> mb(layers), vb(layers);
  for (std::size_t k = 0; k < layers; ++k) {
    mW[k] = vW[k] = Eigen::MatrixXd::Zero(mlp.weights[k].rows(), mlp.weights[k].cols());
    mb[k] = vb[k] = Eigen::VectorXd::Zero(mlp.biases[k].size());
  }

  const std::size_t n = samples.size();
  const std::size_t batches = (n + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = cfg.epochs * batches;
  const double max_angle = cfg.aug_rotation_max_deg * std::numbers::pi / 180.0;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Activations act;
  AdapterGradients grads;
  std::vector<AdaptSample> batch_samples;
  std::vector<std::size_t> local_idx;
  std::size_t step = 0;
  double b1_pow = 1.0, b2_pow = 1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch, hi = std::min(n, lo + cfg.batch);
      batch_samples.clear();
      local_idx.clear();
      for (std::size_t i = lo; i < hi; ++i) {
        const double angle = max_angle > 0.0 ? rng.uniform(-max_angle, max_angle) : 0.0;
        const double shear =
            cfg.aug_shear_max > 0.0 ? rng.uniform(-cfg.aug_shear_max, cfg.aug_shear_max) : 0.0;
        batch_samples.push_back(augment_sample(samples[order[i]], angle, shear));
        local_idx.push_back(i - lo);
      }
      const Eigen::MatrixXd X = stack_inputs(batch_samples, local_idx);
      const Eigen::MatrixXd Y = stack_targets(batch_samples, local_idx);
      const double loss = loss_with_cache(mlp, X, Y, act, &grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("adapter_train: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(hi - lo);

      const double lr = one_cycle_lr(cfg, step, total_steps);
      ++step;
      b1_pow *= cfg.beta1;
      b2_pow *= cfg.beta2;
      const double c1 = 1.0 / (1.0 - b1_pow), c2 = 1.0 / (1.0 - b2_pow);
      for (std::size_t k = 0; k < layers; ++k) {
        mW[k] = cfg.beta1 * mW[k] + (1.0 - cfg.beta1) * grads.weights[k];
        vW[k] = cfg.beta2 * vW[k] + (1.0 - cfg.beta2) * grads.weights[k].cwiseAbs2();
        mlp.weights[k].array() -=
            lr * (mW[k].array() * c1) / ((vW[k].array() * c2).sqrt() + cfg.adam_eps);
        mb[k] = cfg.beta1 * mb[k] + (1.0 - cfg.beta1) * grads.biases[k];
        vb[k] = cfg.beta2 * vb[k] + (1.0 - cfg.beta2) * grads.biases[k].cwiseAbs2();
        mlp.biases[k].array() -=
            lr * (mb[k].array() * c1) / ((vb[k].array() * c2).sqrt() + cfg.adam_eps);
      }
    }
    res.loss_trace.push_back(epoch_loss / static_cast<double>(n));
  }
  return res;
}

AdaptTrainResult adapter_train(const std::vector<AdaptSample>& samples,
                               const AdaptTrainConfig& cfg) {
  if (samples.empty()) throw InvalidArgument("adapter: no training samples");
  return adapter_train(samples, cfg,
                       AdapterMLP::for_conventions(samples.front().pred.size(),
                                                   samples.front().gt.size(), cfg.seed));
}

double adapter_mean_l1(const AdapterMLP& mlp, const std::vector<AdaptSample>& samples) {
  check_samples(samples, mlp);
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Eigen::MatrixXd out = adapter_forward_batch(mlp, stack_inputs(samples, idx));
  return (out - stack_targets(samples, idx)).cwiseAbs().sum() / static_cast<double>(out.size());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json config_to_json(const AdaptTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"base_lr", c.base_lr},
          {"warmup_fraction", c.warmup_fraction},
          {"initial_lr_div", c.initial_lr_div},
          {"final_lr_div", c.final_lr_div},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"batch", c.batch},
          {"aug_rotation_max_deg", c.aug_rotation_max_deg},
          {"aug_shear_max", c.aug_shear_max},
          {"seed", c.seed}};
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap64(v);
}

}  // namespace

std::string serialize_adapter(const AdapterMLP& mlp, const AdaptTrainConfig* cfg) {
  mlp.validate();
  const auto params = mlp.flat_parameters();
  json header = {{"format", "thermoloss-adapter"},
                 {"version", kAdapterModelVersion},
                 {"widths", mlp.widths},
                 {"seed", mlp.seed},
                 {"parameter_count", params.size()},
                 {"config", cfg ? config_to_json(*cfg) : json(nullptr)}};
  std::string out = header.dump() + "\n";
  const std::size_t offset = out.size();
  out.resize(offset + params.size() * 8);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(params[i]));
    std::memcpy(out.data() + offset + 8 * i, &bits, 8);
  }
  return out;
}

AdapterMLP deserialize_adapter(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "adapter model: missing header line");
  }
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kMalformedHeader, std::string("adapter model: ") + e.what());
  }
  if (!header.contains("version")) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "adapter model: version field required");
  }
  if (header.at("version").get<int>() != kAdapterModelVersion) {
    throw ParseError(ParseErrorKind::kUnsupportedMaxval, "adapter model: unsupported version");
  }
  std::vector<std::size_t> widths;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  try {
    widths = header.at("widths").get<std::vector<std::size_t>>();
    seed = header.value("seed", std::uint64_t{0});
    count = header.at("parameter_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kMalformedHeader, std::string("adapter model: ") + e.what());
  }
  AdapterMLP mlp = AdapterMLP::with_widths(widths, seed);
  if (count != mlp.parameter_count()) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "adapter model: parameter_count does not match widths");
  }
  const auto blob = bytes.substr(nl + 1);
  if (blob.size() != count * 8) {
    throw ParseError(ParseErrorKind::kTruncatedPayload, "adapter model: parameter blob has wrong length");
  }
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, blob.data() + 8 * i, 8);
    params[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  mlp.set_flat_parameters(params);
  mlp.validate();
  return mlp;
}

void save_adapter(const AdapterMLP& mlp, const std::filesystem::path& path,
                  const AdaptTrainConfig* cfg) {
  write_file_bytes(path, serialize_adapter(mlp, cfg));
}

AdapterMLP load_adapter(const std::filesystem::path& path) {
  return deserialize_adapter(read_file_bytes(path));
}

}  // namespace thermoloss
