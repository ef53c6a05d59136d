#include "thermoloss/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thermoloss/error.hpp"

namespace thermoloss {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 && !coords_.empty()) throw InvalidArgument("EmpiricalMeasure: zero dimension");
  if (dim_ != 0 && coords_.size() % dim_ != 0) {
    throw DimensionMismatch("EmpiricalMeasure: coordinate count not a multiple of dim");
  }
  for (double v : coords_) {
    if (!std::isfinite(v)) throw InvalidArgument("EmpiricalMeasure: non-finite coordinate");
  }
}

EmpiricalMeasure EmpiricalMeasure::from_points(
    const std::vector<std::vector<double>>& points) {
  if (points.empty()) return {};
  const std::size_t d = points.front().size();
  std::vector<double> coords;
  coords.reserve(points.size() * d);
  for (const auto& p : points) {
    if (p.size() != d) throw DimensionMismatch("EmpiricalMeasure: ragged point list");
    coords.insert(coords.end(), p.begin(), p.end());
  }
  return EmpiricalMeasure(d, std::move(coords));
}

EmpiricalMeasure EmpiricalMeasure::translated(std::span<const double> shift) const {
  if (shift.size() != dim_) throw DimensionMismatch("translated: shift dimension");
  std::vector<double> out = coords_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += shift[i % dim_];
  return EmpiricalMeasure(dim_, std::move(out));
}

double TransportPlan::max_marginal_violation() const {
  double worst = 0.0;
  const double a = 1.0 / static_cast<double>(rows);
  const double b = 1.0 / static_cast<double>(cols);
  std::vector<double> col_sums(cols, 0.0);
  for (std::size_t k = 0; k < rows; ++k) {
    double row = 0.0;
    for (std::size_t l = 0; l < cols; ++l) {
      row += (*this)(k, l);
      col_sums[l] += (*this)(k, l);
    }
    worst = std::max(worst, std::abs(row - a));
  }
  for (double c : col_sums) worst = std::max(worst, std::abs(c - b));
  return worst;
}

std::vector<double> squared_distance_matrix(const EmpiricalMeasure& mu,
                                            const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim()) throw DimensionMismatch("cost matrix: measures differ in dimension");
  const std::size_t K = mu.size(), L = nu.size(), d = mu.dim();
  std::vector<double> cost(K * L);
  for (std::size_t k = 0; k < K; ++k) {
    const auto x = mu.point(k);
    for (std::size_t l = 0; l < L; ++l) {
      const auto y = nu.point(l);
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = x[i] - y[i];
        s += diff * diff;
      }
      cost[k * L + l] = s;
    }
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Assignment

namespace {

// Shortest augmenting path Hungarian method with row/column potentials,
// O(n^3). Rows are inserted in index order and ties in the column scan pick
// the lowest column, so the result is deterministic.
std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based internals; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double assignment_cost(std::span<const double> cost, std::size_t n,
                       const std::vector<std::size_t>& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += cost[k * n + a[k]];
  return s;
}

// Optimal cost of the sub-problem on the given rows/columns.
double sub_optimum(std::span<const double> cost, std::size_t n,
                   const std::vector<std::size_t>& rows,
                   const std::vector<std::size_t>& cols) {
  const std::size_t m = rows.size();
  if (m == 0) return 0.0;
  std::vector<double> sub(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) sub[i * m + j] = cost[rows[i] * n + cols[j]];
  return assignment_cost(sub, m, hungarian(sub, m));
}

}  // namespace

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (n == 0) throw InvalidArgument("solve_assignment: empty problem");
  if (cost.size() != n * n) throw DimensionMismatch("solve_assignment: cost is not n x n");
  auto best = hungarian(cost, n);
  if (n > kLexicographicTieBreakLimit) return best;

  // Fix rows in order to the lowest column that still admits an optimum.
  const double optimum = assignment_cost(cost, n, best);
  double scale = 0.0;
  for (double c : cost) scale = std::max(scale, std::abs(c));
  const double tol = 1e-12 * std::max(1.0, scale * static_cast<double>(n));

  std::vector<std::size_t> result(n);
  std::vector<char> col_used(n, 0);
  double prefix = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t rr = r + 1; rr < n; ++rr) rest_rows.push_back(rr);
    bool fixed = false;
    for (std::size_t c = 0; c < n && !fixed; ++c) {
      if (col_used[c]) continue;
      std::vector<std::size_t> rest_cols;
      for (std::size_t cc = 0; cc < n; ++cc)
        if (!col_used[cc] && cc != c) rest_cols.push_back(cc);
      const double total = prefix + cost[r * n + c] + sub_optimum(cost, n, rest_rows, rest_cols);
      if (total <= optimum + tol) {
        result[r] = c;
        col_used[c] = 1;
        prefix += cost[r * n + c];
        fixed = true;
      }
    }
    if (!fixed) return best;  // rounding pathology; fall back to the solver's optimum
  }
  return result;
}

ExactOtResult exact_w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.empty() || nu.empty()) throw InvalidArgument("exact_w2_squared: empty measure");
  if (mu.size() != nu.size()) {
    throw Unsupported("exact_w2_squared: only equal-size uniform measures are supported");
  }
  const std::size_t n = mu.size();
  const auto cost = squared_distance_matrix(mu, nu);
  ExactOtResult res;
  res.assignment = solve_assignment(cost, n);
  res.plan.rows = res.plan.cols = n;
  res.plan.entries.assign(n * n, 0.0);
  const double w = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    res.plan(k, res.assignment[k]) = w;
    total += cost[k * n + res.assignment[k]];
  }
  res.cost = total / static_cast<double>(n);
  return res;
}

// ---------------------------------------------------------------------------
// Sinkhorn

namespace {

struct LogDomainState {
  std::size_t K, L;
  const std::vector<double>& cost;
  std::vector<double> f, g;
  double log_a, log_b;
};

// f_k = eps log a - eps LSE_l((g_l - C_kl) / eps)
void update_f(LogDomainState& s, double eps) {
  for (std::size_t k = 0; k < s.K; ++k) {
    const double* row = s.cost.data() + k * s.L;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < s.L; ++l) mx = std::max(mx, (s.g[l] - row[l]) / eps);
    double acc = 0.0;
    for (std::size_t l = 0; l < s.L; ++l) acc += std::exp((s.g[l] - row[l]) / eps - mx);
    s.f[k] = eps * s.log_a - eps * (mx + std::log(acc));
  }
}

void update_g(LogDomainState& s, double eps) {
  for (std::size_t l = 0; l < s.L; ++l) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s.K; ++k)
      mx = std::max(mx, (s.f[k] - s.cost[k * s.L + l]) / eps);
    double acc = 0.0;
    for (std::size_t k = 0; k < s.K; ++k)
      acc += std::exp((s.f[k] - s.cost[k * s.L + l]) / eps - mx);
    s.g[l] = eps * s.log_b - eps * (mx + std::log(acc));
  }
}

// Columns are exact right after update_g, so only rows are checked.
double row_violation(const LogDomainState& s, double eps) {
  const double a = std::exp(s.log_a);
  double worst = 0.0;
  for (std::size_t k = 0; k < s.K; ++k) {
    double row = 0.0;
    for (std::size_t l = 0; l < s.L; ++l)
      row += std::exp((s.f[k] + s.g[l] - s.cost[k * s.L + l]) / eps);
    worst = std::max(worst, std::abs(row - a));
  }
  return worst;
}

struct PlanValue {
  double transport = 0.0;
  double entropy = 0.0;
};

PlanValue evaluate_plan(const LogDomainState& s, double eps, TransportPlan* plan) {
  PlanValue v;
  if (plan) {
    plan->rows = s.K;
    plan->cols = s.L;
    plan->entries.assign(s.K * s.L, 0.0);
  }
  for (std::size_t k = 0; k < s.K; ++k) {
    for (std::size_t l = 0; l < s.L; ++l) {
      const double c = s.cost[k * s.L + l];
      const double log_pi = (s.f[k] + s.g[l] - c) / eps;
      const double pi = std::exp(log_pi);
      if (plan) (*plan)(k, l) = pi;
      if (pi > 0.0) {
        v.transport += c * pi;
        v.entropy += pi * log_pi;
      }
    }
  }
  return v;
}

}  // namespace

SinkhornResult sinkhorn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                        const SinkhornConfig& cfg) {
  if (mu.empty() || nu.empty()) throw InvalidArgument("sinkhorn: empty measure");
  if (!(cfg.lambda_e > 0.0)) throw InvalidArgument("sinkhorn: lambda_e must be positive");
  if (!(cfg.tolerance > 0.0)) throw InvalidArgument("sinkhorn: tolerance must be positive");
  if (cfg.max_iters == 0) throw InvalidArgument("sinkhorn: max_iters must be positive");

  const auto cost = squared_distance_matrix(mu, nu);
  LogDomainState s{mu.size(), nu.size(), cost,
                   std::vector<double>(mu.size(), 0.0),
                   std::vector<double>(nu.size(), 0.0),
                   -std::log(static_cast<double>(mu.size())),
                   -std::log(static_cast<double>(nu.size()))};

  std::vector<double> schedule;
  if (cfg.anneal) {
    const double max_cost = *std::max_element(cost.begin(), cost.end());
    for (double eps = max_cost / 10.0; eps > cfg.lambda_e; eps *= 0.5) schedule.push_back(eps);
  }
  schedule.push_back(cfg.lambda_e);

  SinkhornResult res;
  bool final_converged = false;
  for (std::size_t si = 0; si < schedule.size(); ++si) {
    const double eps = schedule[si];
    const double tol = si + 1 == schedule.size()
                           ? cfg.tolerance
                           : std::max(cfg.tolerance, cfg.stage_tolerance);
    SinkhornStage stage;
    stage.epsilon = eps;
    bool converged = false;
    double violation = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
      update_f(s, eps);
      update_g(s, eps);
      ++stage.iterations;
      violation = row_violation(s, eps);
      if (!std::isfinite(violation)) throw NumericalError("sinkhorn: non-finite potentials");
      if (violation <= tol) {
        converged = true;
        break;
      }
    }
    const PlanValue v = evaluate_plan(s, eps, nullptr);
    stage.transport_cost = v.transport;
    stage.cost = v.transport + eps * v.entropy;
    stage.max_violation = violation;
    res.iterations += stage.iterations;
    res.stages.push_back(stage);
    final_converged = converged;
  }

  const PlanValue v = evaluate_plan(s, cfg.lambda_e, &res.plan);
  res.transport_cost = v.transport;
  res.entropy = v.entropy;
  res.cost = v.transport + cfg.lambda_e * v.entropy;
  res.f = std::move(s.f);
  res.g = std::move(s.g);
  res.converged = final_converged;
  res.max_violation = res.stages.back().max_violation;
  return res;
}

std::vector<double> sinkhorn_grad_source(const EmpiricalMeasure& mu,
                                         const EmpiricalMeasure& nu,
                                         const TransportPlan& plan) {
  if (mu.dim() != nu.dim()) throw DimensionMismatch("sinkhorn_grad_source: dimension mismatch");
  if (plan.rows != mu.size() || plan.cols != nu.size() ||
      plan.entries.size() != plan.rows * plan.cols) {
    throw DimensionMismatch("sinkhorn_grad_source: plan shape does not match measures");
  }
  const std::size_t K = mu.size(), L = nu.size(), d = mu.dim();
  std::vector<double> grad(K * d, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto x = mu.point(k);
    double* gk = grad.data() + k * d;
    for (std::size_t l = 0; l < L; ++l) {
      const double p = plan(k, l);
      if (p == 0.0) continue;
      const auto y = nu.point(l);
      for (std::size_t i = 0; i < d; ++i) gk[i] += 2.0 * (x[i] - y[i]) * p;
    }
  }
  return grad;
}

}  // namespace thermoloss
