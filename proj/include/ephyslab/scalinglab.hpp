#pragma once
// Data-constrained scaling-law engine: effective data/parameter transforms,
// loss prediction, robust multi-start law fitting with R^2 diagnostics,
// isoloss grids, the compute-optimal frontier, and the back-of-envelope
// estimators used for cross-study training-budget comparisons.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ephyslab/ndcore.hpp"

namespace ephyslab::scalinglab {

// ---- domain types ----

// Saturating-reuse loss model: L(N, D) = A/N'^alpha + B/D'^beta + E, where
// N' and D' discount repeated parameters/data with half-lives r_n_star and
// r_d_star. r2_* are goodness-of-fit diagnostics filled in by fit_law.
struct FittedLaw {
  double a = 0.0;
  double b = 0.0;
  double e = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double r_d_star = 0.0;
  double r_n_star = 0.0;
  double r2_linear = std::numeric_limits<double>::quiet_NaN();
  double r2_log = std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("FittedLaw: a must be positive");
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("FittedLaw: b must be positive");
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("FittedLaw: e must be nonnegative");
    if (!(alpha > 0.0)) throw ConfigError("FittedLaw: alpha must be positive");
    if (!(beta > 0.0)) throw ConfigError("FittedLaw: beta must be positive");
    if (!(r_d_star > 0.0)) throw ConfigError("FittedLaw: r_d_star must be positive");
    if (!(r_n_star > 0.0)) throw ConfigError("FittedLaw: r_n_star must be positive");
  }
};

// One training run: model size, unique token count, epochs trained, and the
// loss it reached. Repetitions are epochs - 1.
struct ScalingObservation {
  double params = 0.0;
  double unique_tokens = 0.0;
  double epochs = 1.0;
  double loss = 0.0;
};

struct GridCell {
  double params = 0.0;
  double epochs = 0.0;
  double loss = 0.0;
  double flops = 0.0;
};

// Rectangular params-by-epochs grid of predicted losses and training FLOPs,
// cells stored row-major with the epoch axis fastest.
struct ComputeGrid {
  std::vector<double> param_axis;
  std::vector<double> epoch_axis;
  std::vector<GridCell> cells;

  const GridCell& at(std::size_t i, std::size_t j) const {
    return cells[i * epoch_axis.size() + j];
  }
};

struct FrontierPoint {
  double budget = 0.0;
  double params = std::numeric_limits<double>::quiet_NaN();
  double epochs = std::numeric_limits<double>::quiet_NaN();
  double loss = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
};

// ---- effective scale transforms ----

// Value of data seen (1 + r_d) times: the first pass counts in full, later
// passes decay exponentially with half-life r_d_star, saturating at
// u_d * (1 + r_d_star).
inline double effective_data(double u_d, double r_d, double r_d_star) {
  if (!(u_d > 0.0)) throw DataError("effective_data: unique token count must be positive");
  if (!(r_d >= 0.0)) throw DataError("effective_data: repetitions must be nonnegative");
  if (!(r_d_star > 0.0)) throw DataError("effective_data: half-life must be positive");
  return u_d + u_d * r_d_star * (1.0 - std::exp(-r_d / r_d_star));
}

// Compute-optimal model size for a token budget u_d. Minimizing
// a/N^alpha + b/D^beta along a constant-compute curve N*D = const gives the
// first-order condition alpha*a/N^alpha = beta*b/D^beta; solving for N yields
// N*(D) = g*(g*D)^(beta/alpha) with g = (alpha*a/(beta*b))^(1/(alpha+beta)).
// The FLOPs-per-token-param constant cancels, so the pairing is free of it.
inline double optimal_params_for_tokens(double u_d, const FittedLaw& law) {
  if (!(u_d > 0.0)) throw DataError("optimal_params_for_tokens: token count must be positive");
  const double g = std::pow(law.alpha * law.a / (law.beta * law.b), 1.0 / (law.alpha + law.beta));
  return g * std::pow(g * u_d, law.beta / law.alpha);
}

// Value of n parameters against a token budget u_d: parameters up to the
// compute-optimal count for u_d count in full, the excess ratio decays with
// half-life r_n_star just like repeated data.
inline double effective_params(double n, double u_d, const FittedLaw& law) {
  if (!(n > 0.0)) throw DataError("effective_params: parameter count must be positive");
  const double n_star = optimal_params_for_tokens(u_d, law);
  const double u_n = std::min(n, n_star);
  const double r_n = n / u_n - 1.0;
  return u_n + u_n * law.r_n_star * (1.0 - std::exp(-r_n / law.r_n_star));
}

// ---- loss prediction ----

inline double predict_loss(const FittedLaw& law, double n, double u_d, double epochs) {
  if (!(epochs >= 1.0)) throw DataError("predict_loss: epochs must be >= 1");
  const double d_eff = effective_data(u_d, epochs - 1.0, law.r_d_star);
  const double n_eff = effective_params(n, u_d, law);
  return law.a / std::pow(n_eff, law.alpha) + law.b / std::pow(d_eff, law.beta) + law.e;
}

// ---- law fitting ----

// Multi-start initializer ranges for the fit; the cartesian product of the
// four lists seeds one local optimization each.
struct InitGrid {
  std::vector<double> alphas{0.15, 0.45, 0.85};
  std::vector<double> betas{0.15, 0.45, 0.85};
  std::vector<double> r_d_stars{1.0, 10.0};
  std::vector<double> r_n_stars{1.0, 10.0};
};

struct FitReport {
  FittedLaw law;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> residual_log;  // log(pred) - log(obs), input order
  std::vector<std::string> warnings;
  int starts = 0;
};

namespace detail {

inline constexpr double kHuberDelta = 1e-3;
inline constexpr int kThetaDim = 7;  // log a, log b, log e, alpha, beta, r_d*, r_n*

using Theta = std::array<double, kThetaDim>;

inline double huber(double r, double delta) {
  const double m = std::abs(r);
  return m <= delta ? 0.5 * r * r : delta * (m - 0.5 * delta);
}

inline FittedLaw law_from_theta(const Theta& t) {
  FittedLaw law;
  law.a = std::exp(t[0]);
  law.b = std::exp(t[1]);
  law.e = std::exp(t[2]);
  law.alpha = t[3];
  law.beta = t[4];
  law.r_d_star = t[5];
  law.r_n_star = t[6];
  return law;
}

// Sum of Huber losses on log residuals; the predicted loss is evaluated
// directly, with a box on the exponents and half-lives so line searches
// cannot wander into degenerate laws.
inline double fit_objective(const Theta& t, const std::vector<ScalingObservation>& obs) {
  const double inf = std::numeric_limits<double>::infinity();
  if (!(t[3] > 0.01 && t[3] < 2.5)) return inf;
  if (!(t[4] > 0.01 && t[4] < 2.5)) return inf;
  if (!(t[5] > 0.05 && t[5] < 200.0)) return inf;
  if (!(t[6] > 0.05 && t[6] < 200.0)) return inf;
  if (!(t[0] > -300.0 && t[0] < 300.0)) return inf;
  if (!(t[1] > -300.0 && t[1] < 300.0)) return inf;
  if (!(t[2] > -300.0 && t[2] < 80.0)) return inf;
  const FittedLaw law = law_from_theta(t);
  double total = 0.0;
  for (const auto& o : obs) {
    const double pred = predict_loss(law, o.params, o.unique_tokens, o.epochs);
    if (!(pred > 0.0) || !std::isfinite(pred)) return inf;
    total += huber(std::log(pred) - std::log(o.loss), kHuberDelta);
  }
  return std::isfinite(total) ? total : inf;
}

inline Theta fit_gradient(const Theta& t, const std::vector<ScalingObservation>& obs) {
  Theta g{};
  for (int i = 0; i < kThetaDim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(t[i]));
    Theta tp = t, tm = t;
    tp[i] += h;
    tm[i] -= h;
    g[i] = (fit_objective(tp, obs) - fit_objective(tm, obs)) / (2.0 * h);
  }
  return g;
}

// Quasi-newton local refinement with backtracking line search; falls back to
// steepest descent whenever the accumulated curvature stops being a descent
// model.
inline void bfgs_refine(Theta& t, double& f, const std::vector<ScalingObservation>& obs,
                        int max_iters) {
  using Mat = std::array<std::array<double, kThetaDim>, kThetaDim>;
  Mat h{};
  for (int i = 0; i < kThetaDim; ++i) h[i][i] = 1.0;
  f = fit_objective(t, obs);
  if (!std::isfinite(f)) return;
  Theta g = fit_gradient(t, obs);
  for (int iter = 0; iter < max_iters; ++iter) {
    Theta p{};
    for (int i = 0; i < kThetaDim; ++i)
      for (int j = 0; j < kThetaDim; ++j) p[i] -= h[i][j] * g[j];
    double slope = 0.0;
    for (int i = 0; i < kThetaDim; ++i) slope += p[i] * g[i];
    if (!(slope < 0.0)) {
      for (int i = 0; i < kThetaDim; ++i) {
        for (int j = 0; j < kThetaDim; ++j) h[i][j] = 0.0;
        h[i][i] = 1.0;
        p[i] = -g[i];
      }
      slope = 0.0;
      for (int i = 0; i < kThetaDim; ++i) slope += p[i] * g[i];
      if (!(slope < 0.0)) break;
    }
    double step = 1.0;
    Theta tn{};
    double fn = std::numeric_limits<double>::infinity();
    bool moved = false;
    for (int bt = 0; bt < 50; ++bt) {
      for (int i = 0; i < kThetaDim; ++i) tn[i] = t[i] + step * p[i];
      fn = fit_objective(tn, obs);
      if (fn <= f + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    const Theta gn = fit_gradient(tn, obs);
    Theta s{}, y{};
    double sy = 0.0;
    for (int i = 0; i < kThetaDim; ++i) {
      s[i] = tn[i] - t[i];
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
    }
    const double f_prev = f;
    t = tn;
    f = fn;
    g = gn;
    double gmax = 0.0;
    for (int i = 0; i < kThetaDim; ++i) gmax = std::max(gmax, std::abs(g[i]));
    if (gmax < 1e-12 || std::abs(f_prev - f) <= 1e-18 * (1.0 + std::abs(f))) break;
    if (sy > 1e-12) {
      // BFGS inverse-hessian update
      Theta hy{};
      for (int i = 0; i < kThetaDim; ++i)
        for (int j = 0; j < kThetaDim; ++j) hy[i] += h[i][j] * y[j];
      double yhy = 0.0;
      for (int i = 0; i < kThetaDim; ++i) yhy += y[i] * hy[i];
      const double c1 = (sy + yhy) / (sy * sy);
      for (int i = 0; i < kThetaDim; ++i)
        for (int j = 0; j < kThetaDim; ++j)
          h[i][j] += c1 * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
    }
  }
}

// Least-squares amplitudes for fixed exponents, assuming no parameter excess;
// used only to seed the local optimizations.
inline void seed_amplitudes(const std::vector<ScalingObservation>& obs, double alpha, double beta,
                            double r_d_star, double& a0, double& b0, double& e0) {
  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& o : obs) min_loss = std::min(min_loss, o.loss);
  e0 = 0.5 * min_loss;
  double sxx = 0.0, sxy = 0.0, syy = 0.0, sxz = 0.0, syz = 0.0;
  for (const auto& o : obs) {
    const double x = std::pow(o.params, -alpha);
    const double y = std::pow(effective_data(o.unique_tokens, o.epochs - 1.0, r_d_star), -beta);
    const double z = o.loss - e0;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    sxz += x * z;
    syz += y * z;
  }
  const double det = sxx * syy - sxy * sxy;
  a0 = 1.0;
  b0 = 1.0;
  if (std::abs(det) > 1e-300) {
    const double a = (sxz * syy - syz * sxy) / det;
    const double b = (syz * sxx - sxz * sxy) / det;
    if (a > 1e-12 && std::isfinite(a)) a0 = a;
    if (b > 1e-12 && std::isfinite(b)) b0 = b;
  }
}

}  // namespace detail

// Fits the law to observed (params, unique_tokens, epochs, loss) runs by
// minimizing a Huber loss on log residuals, multi-started from init_grid and
// refined quasi-newton. Observations are canonically sorted first so the
// result is independent of input order.
inline FitReport fit_law_report(const std::vector<ScalingObservation>& observations,
                                const InitGrid& grid = InitGrid{}) {
  if (observations.size() < 8)
    throw DataError("fit_law: need at least 8 observations, got " +
                    std::to_string(observations.size()));
  std::vector<double> distinct_params, distinct_epochs;
  for (const auto& o : observations) {
    if (!(o.params > 0.0) || !(o.unique_tokens > 0.0) || !(o.loss > 0.0))
      throw DataError("fit_law: observations must have positive params, tokens, and loss");
    if (!(o.epochs >= 1.0)) throw DataError("fit_law: observation epochs must be >= 1");
    distinct_params.push_back(o.params);
    distinct_epochs.push_back(o.epochs);
  }
  const auto count_distinct = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  };
  if (count_distinct(distinct_params) < 2)
    throw DataError("fit_law: observations must span at least 2 parameter counts");
  if (count_distinct(distinct_epochs) < 2)
    throw DataError("fit_law: observations must span at least 2 epoch values");

  std::vector<ScalingObservation> obs = observations;
  std::sort(obs.begin(), obs.end(), [](const ScalingObservation& x, const ScalingObservation& y) {
    if (x.params != y.params) return x.params < y.params;
    if (x.unique_tokens != y.unique_tokens) return x.unique_tokens < y.unique_tokens;
    if (x.epochs != y.epochs) return x.epochs < y.epochs;
    return x.loss < y.loss;
  });

  detail::Theta best{};
  double best_f = std::numeric_limits<double>::infinity();
  int starts = 0;
  for (double a0 : grid.alphas)
    for (double b0 : grid.betas)
      for (double rd0 : grid.r_d_stars)
        for (double rn0 : grid.r_n_stars) {
          double amp_a, amp_b, amp_e;
          detail::seed_amplitudes(obs, a0, b0, rd0, amp_a, amp_b, amp_e);
          detail::Theta t{std::log(amp_a), std::log(amp_b), std::log(amp_e), a0, b0, rd0, rn0};
          double f;
          detail::bfgs_refine(t, f, obs, 300);
          ++starts;
          if (f < best_f) {
            best_f = f;
            best = t;
          }
        }
  if (!std::isfinite(best_f)) throw DataError("fit_law: every start diverged");

  FitReport rep;
  rep.law = detail::law_from_theta(best);
  rep.objective = best_f;
  rep.starts = starts;

  // r^2 diagnostics in canonical order so they are order invariant too
  double mean_lin = 0.0, mean_log = 0.0;
  for (const auto& o : obs) {
    mean_lin += o.loss;
    mean_log += std::log(o.loss);
  }
  mean_lin /= static_cast<double>(obs.size());
  mean_log /= static_cast<double>(obs.size());
  double ss_res_lin = 0.0, ss_tot_lin = 0.0, ss_res_log = 0.0, ss_tot_log = 0.0;
  bool any_excess_params = false;
  for (const auto& o : obs) {
    const double pred = predict_loss(rep.law, o.params, o.unique_tokens, o.epochs);
    ss_res_lin += (pred - o.loss) * (pred - o.loss);
    ss_tot_lin += (o.loss - mean_lin) * (o.loss - mean_lin);
    const double rl = std::log(pred) - std::log(o.loss);
    ss_res_log += rl * rl;
    ss_tot_log += (std::log(o.loss) - mean_log) * (std::log(o.loss) - mean_log);
    if (o.params > optimal_params_for_tokens(o.unique_tokens, rep.law) * (1.0 + 1e-9))
      any_excess_params = true;
  }
  rep.law.r2_linear = ss_tot_lin > 0.0 ? 1.0 - ss_res_lin / ss_tot_lin : 1.0;
  rep.law.r2_log = ss_tot_log > 0.0 ? 1.0 - ss_res_log / ss_tot_log : 1.0;
  if (!any_excess_params)
    rep.warnings.push_back(
        "no observation exceeds the compute-optimal parameter count; r_n_star is "
        "unconstrained by the data");

  rep.residual_log.reserve(observations.size());
  for (const auto& o : observations)
    rep.residual_log.push_back(
        std::log(predict_loss(rep.law, o.params, o.unique_tokens, o.epochs)) - std::log(o.loss));
  return rep;
}

inline FittedLaw fit_law(const std::vector<ScalingObservation>& observations,
                         const InitGrid& grid = InitGrid{}) {
  return fit_law_report(observations, grid).law;
}

// ---- compute grids and frontier ----

inline double flops_per_epoch(double n, double tokens_per_epoch, double k = 6.0) {
  if (!(k > 0.0)) throw ConfigError("flops_per_epoch: k must be positive");
  if (!(n >= 0.0) || !(tokens_per_epoch >= 0.0))
    throw DataError("flops_per_epoch: counts must be nonnegative");
  return k * n * tokens_per_epoch;
}

inline ComputeGrid isoloss_grid(const FittedLaw& law, double u_d,
                                const std::vector<double>& param_axis,
                                const std::vector<double>& epoch_axis, double k = 6.0) {
  if (param_axis.empty() || epoch_axis.empty())
    throw DataError("isoloss_grid: axes must be nonempty");
  const auto check_axis = [](const std::vector<double>& axis, const char* name) {
    for (std::size_t i = 0; i < axis.size(); ++i) {
      if (!(axis[i] > 0.0)) throw DataError(std::string("isoloss_grid: ") + name + " must be positive");
      if (i > 0 && !(axis[i] > axis[i - 1]))
        throw DataError(std::string("isoloss_grid: ") + name + " must be strictly increasing");
    }
  };
  check_axis(param_axis, "param axis");
  check_axis(epoch_axis, "epoch axis");
  ComputeGrid grid;
  grid.param_axis = param_axis;
  grid.epoch_axis = epoch_axis;
  grid.cells.reserve(param_axis.size() * epoch_axis.size());
  for (double n : param_axis)
    for (double ep : epoch_axis) {
      GridCell cell;
      cell.params = n;
      cell.epochs = ep;
      cell.loss = predict_loss(law, n, u_d, ep);
      cell.flops = flops_per_epoch(n, u_d, k) * ep;
      grid.cells.push_back(cell);
    }
  return grid;
}

// Cheapest best cell per budget: minimum predicted loss over cells within the
// FLOP budget, ties broken toward smaller models, then fewer epochs. Budgets
// below the cheapest cell come back marked infeasible.
inline std::vector<FrontierPoint> compute_frontier(const ComputeGrid& grid,
                                                   const std::vector<double>& budgets) {
  std::vector<FrontierPoint> out;
  out.reserve(budgets.size());
  for (double budget : budgets) {
    if (!(budget > 0.0)) throw DataError("compute_frontier: budgets must be positive");
    FrontierPoint pt;
    pt.budget = budget;
    for (const auto& c : grid.cells) {
      if (c.flops > budget) continue;
      const bool better =
          !pt.feasible || c.loss < pt.loss ||
          (c.loss == pt.loss && (c.params < pt.params ||
                                 (c.params == pt.params && c.epochs < pt.epochs)));
      if (better) {
        pt.params = c.params;
        pt.epochs = c.epochs;
        pt.loss = c.loss;
        pt.feasible = true;
      }
    }
    out.push_back(pt);
  }
  return out;
}

// ---- cross-study estimators ----

// Training volume normalized to a reference corpus: channel-hours processed
// over the whole run divided by the reference corpus size.
inline double scaled_epochs(double src_channel_hours, double src_epochs,
                            double ref_channel_hours = 352035.0) {
  if (!(src_channel_hours > 0.0) || !(src_epochs > 0.0) || !(ref_channel_hours > 0.0))
    throw DataError("scaled_epochs: all inputs must be positive");
  return src_channel_hours * src_epochs / ref_channel_hours;
}

// Standard per-layer transformer count: 4d^2 attention, 2dr + r feed-forward,
// 9d norms and biases; extra covers everything outside the trunk.
inline double transformer_param_estimate(std::int64_t d, std::int64_t r, std::int64_t layers,
                                         double extra = 0.0) {
  if (d < 1 || r < 1 || layers < 1)
    throw DataError("transformer_param_estimate: dimensions must be >= 1");
  const double dd = static_cast<double>(d), rr = static_cast<double>(r);
  return extra + static_cast<double>(layers) * (4.0 * dd * dd + 2.0 * dd * rr + rr + 9.0 * dd);
}

inline double estimate_epochs(double updates, double batch, double accum, double n_samples) {
  if (!(updates > 0.0) || !(batch > 0.0) || !(accum > 0.0) || !(n_samples > 0.0))
    throw DataError("estimate_epochs: all inputs must be positive");
  return updates * batch * accum / n_samples;
}

inline double channel_hours(double trials, double channels, double seconds) {
  if (!(trials >= 0.0) || !(channels >= 0.0) || !(seconds >= 0.0))
    throw DataError("channel_hours: all inputs must be nonnegative");
  return trials * channels * seconds / 3600.0;
}

// ---- csv / json interfaces ----

namespace detail {
inline std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}
}  // namespace detail

// Parses "params,unique_tokens,epochs,loss" rows; blank lines are skipped.
inline std::vector<ScalingObservation> observations_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("observations csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "params,unique_tokens,epochs,loss")
    throw DataError("observations csv: expected header params,unique_tokens,epochs,loss, got \"" +
                    line + "\"");
  std::vector<ScalingObservation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ScalingObservation o;
    char trailing;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf %c", &o.params, &o.unique_tokens, &o.epochs,
                    &o.loss, &trailing) != 4)
      throw DataError("observations csv: malformed row at line " + std::to_string(lineno));
    out.push_back(o);
  }
  return out;
}

inline std::string observations_csv(const std::vector<ScalingObservation>& obs) {
  std::string out = "params,unique_tokens,epochs,loss\n";
  for (const auto& o : obs)
    out += detail::g9(o.params) + "," + detail::g9(o.unique_tokens) + "," + detail::g9(o.epochs) +
           "," + detail::g9(o.loss) + "\n";
  return out;
}

inline std::string contour_csv(const ComputeGrid& grid) {
  std::string out = "params,epochs,loss,flops\n";
  for (const auto& c : grid.cells)
    out += detail::g9(c.params) + "," + detail::g9(c.epochs) + "," + detail::g9(c.loss) + "," +
           detail::g9(c.flops) + "\n";
  return out;
}

inline std::string frontier_csv(const std::vector<FrontierPoint>& frontier) {
  std::string out = "budget,params,epochs,loss\n";
  for (const auto& p : frontier)
    out += detail::g9(p.budget) + "," + detail::g9(p.params) + "," + detail::g9(p.epochs) + "," +
           detail::g9(p.loss) + "\n";
  return out;
}

inline nlohmann::ordered_json fit_report_json(const FitReport& rep) {
  nlohmann::ordered_json j;
  j["a"] = rep.law.a;
  j["b"] = rep.law.b;
  j["e"] = rep.law.e;
  j["alpha"] = rep.law.alpha;
  j["beta"] = rep.law.beta;
  j["r_d_star"] = rep.law.r_d_star;
  j["r_n_star"] = rep.law.r_n_star;
  j["r2_linear"] = rep.law.r2_linear;
  j["r2_log"] = rep.law.r2_log;
  j["objective"] = rep.objective;
  j["starts"] = rep.starts;
  j["warnings"] = rep.warnings;
  j["residual_log"] = rep.residual_log;
  return j;
}

}  // namespace ephyslab::scalinglab
