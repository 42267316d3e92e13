#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "enetpath/matrix.hpp"
#include "enetpath/penalty.hpp"

namespace enetpath {

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/**
 * One penalized weighted least squares subproblem:
 *
 *   min over (b0, beta)  (1/2n) sum_i w_i (z_i - b0 - xt_i^T beta)^2
 *                        + lambda sum_j gamma_j ((1-alpha)/2 beta_j^2 + alpha |beta_j|)
 *   subject to L_j <= beta_j <= U_j
 *
 * where xt is the implicitly standardized design: xt_ij = (x_ij - c_j) / s_j
 * with c, s taken from `stats` according to the penalty flags. Coefficients
 * here live on the internal (standardized) scale; bounds are given on the
 * original scale and rescaled internally.
 */
struct WlsProblem {
  const FeatureMatrix* X = nullptr;
  const ColumnStats* stats = nullptr;
  bool center = false;  // subtract column means (intercept present or Cox)
  std::vector<double> z;
  std::vector<double> w;
  const PenaltySpec* penalty = nullptr;
  double lambda = 0.0;
  double lambda_prev = 0.0;
  std::vector<double> warm_beta;  // internal scale; empty means zeros
  double warm_intercept = 0.0;
  std::vector<int> active_hint;   // sorted feature indices to seed the working set
};

struct PwlsOptions {
  double tol = 1e-7;           // on max_j v_j (delta beta_j)^2 per sweep
  long max_passes = 100000;    // total coordinate sweeps
  double kkt_tol = 1e-7;
  bool use_strong_rules = true;
  bool record_pass_objectives = false;
};

struct PwlsResult {
  double intercept = 0.0;
  std::vector<double> beta;       // internal scale
  std::vector<double> gradient;   // (1/n) sum_i w_i xt_ij r_i at the solution, all features
  std::vector<int> working_set;   // final strong set, sorted
  long n_passes = 0;
  bool converged = true;
  std::vector<double> pass_objectives;
};

/**
 * Strong-rule screen: keep warm nonzeros, unpenalized features, and any j
 * with |grad_prev_j| > alpha (2 lambda_k - lambda_km1) gamma_j.
 */
inline std::vector<int> strong_set(const std::vector<double>& grad_prev, double lambda_k,
                                   double lambda_km1, const PenaltySpec& penalty,
                                   const std::vector<double>& warm_beta = {}) {
  const int p = penalty.n_features();
  if (grad_prev.size() != static_cast<std::size_t>(p))
    throw std::invalid_argument("strong_set: gradient length mismatch");
  const double slope = penalty.alpha * (2.0 * lambda_k - lambda_km1);
  std::vector<int> s;
  for (int j = 0; j < p; ++j) {
    const bool warm_nonzero = !warm_beta.empty() && warm_beta[j] != 0.0;
    if (penalty.factors[j] == 0.0 || warm_nonzero ||
        std::abs(grad_prev[j]) > slope * penalty.factors[j])
      s.push_back(j);
  }
  return s;
}

namespace detail {

struct InternalScale {
  std::vector<double> center, scale;  // c_j, s_j
  std::vector<double> lower, upper;   // internal-scale bounds
  std::vector<char> excluded;         // zero-variance columns under standardization
};

inline InternalScale make_internal_scale(const WlsProblem& prob) {
  const int p = prob.X->cols();
  const PenaltySpec& pen = *prob.penalty;
  InternalScale sc;
  sc.center.assign(p, 0.0);
  sc.scale.assign(p, 1.0);
  sc.excluded.assign(p, 0);
  sc.lower = pen.lower;
  sc.upper = pen.upper;
  for (int j = 0; j < p; ++j) {
    if (pen.standardize && prob.stats) {
      if (prob.stats->zero_variance[j]) {
        sc.excluded[j] = 1;
      } else {
        sc.scale[j] = prob.stats->scales[j];
        sc.lower[j] = pen.lower[j] * sc.scale[j];
        sc.upper[j] = pen.upper[j] * sc.scale[j];
      }
    }
    if (prob.center && prob.stats) sc.center[j] = prob.stats->means[j];
  }
  return sc;
}

/// Residual/gradient state for cyclic coordinate descent. The residual is
/// kept in uncentered form rho_i = z_i - sum_j x_ij beta_j / s_j plus the
/// scalar correction scal = off - b0, so sparse columns never touch rows
/// outside their support: r_i = rho_i + scal.
class CdState {
 public:
  CdState(const WlsProblem& prob, const InternalScale& sc)
      : X_(*prob.X), z_(prob.z), w_(prob.w), sc_(sc), n_(prob.X->rows()),
        p_(prob.X->cols()) {
    W_ = 0.0;
    for (double wi : w_) W_ += wi;
    wx_.assign(p_, 0.0);
    wxx_.assign(p_, 0.0);
    v_.assign(p_, 0.0);
    for (int j = 0; j < p_; ++j) {
      double a = 0.0, b = 0.0;
      X_.for_col(j, [&](int i, double x) {
        a += w_[i] * x;
        b += w_[i] * x * x;
      });
      wx_[j] = a;
      wxx_[j] = b;
      if (!sc_.excluded[j]) {
        const double c = sc_.center[j], s = sc_.scale[j];
        v_[j] = (b - 2.0 * c * a + c * c * W_) / (n_ * s * s);
        if (v_[j] < 0.0) v_[j] = 0.0;
      }
    }

    beta_.assign(p_, 0.0);
    b0_ = prob.warm_intercept;
    rho_ = z_;
    off_ = 0.0;
    if (!prob.warm_beta.empty()) {
      for (int j = 0; j < p_; ++j) {
        double bj = prob.warm_beta[j];
        if (sc_.excluded[j]) bj = 0.0;
        bj = std::clamp(bj, sc_.lower[j], sc_.upper[j]);
        beta_[j] = bj;
        if (bj != 0.0) {
          const double d = bj / sc_.scale[j];
          X_.for_col(j, [&](int i, double x) { rho_[i] -= x * d; });
          off_ += sc_.center[j] * d;
        }
      }
    }
    refresh_wr();
  }

  int n() const { return n_; }
  double total_weight() const { return W_; }
  double v(int j) const { return v_[j]; }
  const std::vector<double>& beta() const { return beta_; }
  double intercept() const { return b0_; }

  void refresh_wr() {
    wr_ = 0.0;
    for (int i = 0; i < n_; ++i) wr_ += w_[i] * rho_[i];
  }

  /// (1/n) sum_i w_i xt_ij r_i at the current state.
  double gradient(int j) const {
    if (sc_.excluded[j]) return 0.0;
    double dot = 0.0;
    X_.for_col(j, [&](int i, double x) { dot += w_[i] * x * rho_[i]; });
    const double scal = off_ - b0_;
    const double c = sc_.center[j];
    return (dot + scal * wx_[j] - c * wr_ - c * scal * W_) / (n_ * sc_.scale[j]);
  }

  void set_coef(int j, double bnew) {
    const double delta = bnew - beta_[j];
    if (delta == 0.0) return;
    const double d = delta / sc_.scale[j];
    X_.for_col(j, [&](int i, double x) { rho_[i] -= x * d; });
    wr_ -= d * wx_[j];
    off_ += sc_.center[j] * d;
    beta_[j] = bnew;
  }

  /// Unpenalized intercept step; returns the change.
  double update_intercept() {
    const double scal = off_ - b0_;
    const double delta = (wr_ + scal * W_) / W_;
    b0_ += delta;
    return delta;
  }

  void set_intercept(double b0) { b0_ = b0; }

  double objective(double lambda, const PenaltySpec& pen) const {
    const double scal = off_ - b0_;
    double rss = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double r = rho_[i] + scal;
      rss += w_[i] * r * r;
    }
    return rss / (2.0 * n_) + pen.value(lambda, beta_);
  }

 private:
  const FeatureMatrix& X_;
  const std::vector<double>& z_;
  const std::vector<double>& w_;
  const InternalScale& sc_;
  int n_, p_;
  double W_ = 0.0;
  std::vector<double> wx_, wxx_, v_;
  std::vector<double> beta_;
  double b0_ = 0.0;
  std::vector<double> rho_;
  double off_ = 0.0;
  double wr_ = 0.0;
};

enum class KktStatus { ok, violation };

inline KktStatus kkt_condition(double g, double b, double l1, double l2, double lo, double hi,
                               double tol) {
  if (b == 0.0) return std::abs(g) > l1 + tol ? KktStatus::violation : KktStatus::ok;
  if (b >= hi) return g >= l2 * hi + l1 - tol ? KktStatus::ok : KktStatus::violation;
  if (b <= lo) return g <= l2 * lo - l1 + tol ? KktStatus::ok : KktStatus::violation;
  const double s = b > 0.0 ? 1.0 : -1.0;
  return std::abs(g - l2 * b - l1 * s) > tol ? KktStatus::violation : KktStatus::ok;
}

}  // namespace detail

/**
 * Subgradient optimality check over all features at the candidate solution
 * (internal scale). Returns the violating indices at the given absolute
 * tolerance.
 */
inline std::vector<int> kkt_check(const std::vector<double>& beta, double intercept,
                                  const WlsProblem& prob, double tol) {
  const int p = prob.X->cols();
  if (beta.size() != static_cast<std::size_t>(p))
    throw std::invalid_argument("kkt_check: coefficient length mismatch");
  const detail::InternalScale sc = detail::make_internal_scale(prob);
  detail::CdState state(prob, sc);
  for (int j = 0; j < p; ++j) state.set_coef(j, sc.excluded[j] ? 0.0 : beta[j]);
  state.set_intercept(intercept);
  state.refresh_wr();
  const PenaltySpec& pen = *prob.penalty;
  std::vector<int> viol;
  for (int j = 0; j < p; ++j) {
    if (sc.excluded[j]) continue;
    const double g = state.gradient(j);
    const double l1 = prob.lambda * pen.alpha * pen.factors[j];
    const double l2 = prob.lambda * (1.0 - pen.alpha) * pen.factors[j];
    if (detail::kkt_condition(g, state.beta()[j], l1, l2, sc.lower[j], sc.upper[j], tol) ==
        detail::KktStatus::violation)
      viol.push_back(j);
  }
  return viol;
}

/**
 * Cyclic coordinate descent over the strong set with KKT certification:
 * descend until max_j v_j (delta beta_j)^2 < tol, check the subgradient
 * conditions over all p features, grow the set and repeat until no
 * violations remain. When violations persist inside the working set the
 * sweep tolerance is tightened instead.
 */
inline PwlsResult solve_pwls(const WlsProblem& prob, const PwlsOptions& opts = {}) {
  if (!prob.X || !prob.penalty) throw std::invalid_argument("solve_pwls: missing inputs");
  const int n = prob.X->rows(), p = prob.X->cols();
  if (prob.z.size() != static_cast<std::size_t>(n) ||
      prob.w.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("solve_pwls: z/w length mismatch");
  if (prob.penalty->n_features() != p)
    throw std::invalid_argument("solve_pwls: penalty length mismatch");
  if (prob.lambda < 0.0) throw std::invalid_argument("solve_pwls: negative lambda");

  const PenaltySpec& pen = *prob.penalty;
  const detail::InternalScale sc = detail::make_internal_scale(prob);
  detail::CdState state(prob, sc);
  if (!pen.intercept) state.set_intercept(0.0);

  const double v0 = state.total_weight() / n;
  std::vector<double> l1(p), l2(p);
  for (int j = 0; j < p; ++j) {
    l1[j] = prob.lambda * pen.alpha * pen.factors[j];
    l2[j] = prob.lambda * (1.0 - pen.alpha) * pen.factors[j];
  }

  PwlsResult res;
  res.beta.assign(p, 0.0);
  res.gradient.assign(p, 0.0);

  // working set
  std::vector<char> in_set(p, 0);
  std::vector<int> set;
  if (opts.use_strong_rules) {
    std::vector<double> g0(p);
    for (int j = 0; j < p; ++j) g0[j] = state.gradient(j);
    set = strong_set(g0, prob.lambda, prob.lambda_prev, pen, state.beta());
    for (int j : prob.active_hint) set.push_back(j);
  } else {
    set.resize(p);
    for (int j = 0; j < p; ++j) set[j] = j;
  }
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  for (int j : set) in_set[j] = 1;

  auto update_coord = [&](int j) -> double {
    if (sc.excluded[j]) return 0.0;
    const double denom = state.v(j) + l2[j];
    double bnew = 0.0;
    if (denom > 0.0) {
      const double u = state.gradient(j) + state.v(j) * state.beta()[j];
      bnew = std::clamp(soft_threshold(u, l1[j]) / denom, sc.lower[j], sc.upper[j]);
    }
    const double delta = bnew - state.beta()[j];
    state.set_coef(j, bnew);
    return state.v(j) * delta * delta;
  };

  auto sweep = [&](const std::vector<int>& idx) -> double {
    double dlx = 0.0;
    for (int j : idx) dlx = std::max(dlx, update_coord(j));
    if (pen.intercept) {
      const double d = state.update_intercept();
      dlx = std::max(dlx, v0 * d * d);
    }
    ++res.n_passes;
    if (opts.record_pass_objectives)
      res.pass_objectives.push_back(state.objective(prob.lambda, pen));
    return dlx;
  };

  double tol = opts.tol;
  bool certified = false;
  for (int round = 0; round < 1000 && !certified; ++round) {
    // converge on the working set
    bool budget = true;
    while (true) {
      state.refresh_wr();
      const double dlx = sweep(set);
      if (res.n_passes >= opts.max_passes) { budget = false; break; }
      if (dlx < tol) break;
      // polish the current active subset before the next full working-set sweep
      std::vector<int> active;
      for (int j : set)
        if (state.beta()[j] != 0.0) active.push_back(j);
      while (true) {
        const double d2 = sweep(active);
        if (res.n_passes >= opts.max_passes) { budget = false; break; }
        if (d2 < tol) break;
      }
      if (!budget) break;
    }
    if (!budget) {
      res.converged = false;
      break;
    }
    // certify over all p
    state.refresh_wr();
    bool grew = false, in_set_viol = false;
    for (int j = 0; j < p; ++j) {
      if (sc.excluded[j]) continue;
      const double g = state.gradient(j);
      if (detail::kkt_condition(g, state.beta()[j], l1[j], l2[j], sc.lower[j], sc.upper[j],
                                opts.kkt_tol) == detail::KktStatus::violation) {
        if (!in_set[j]) {
          in_set[j] = 1;
          set.push_back(j);
          grew = true;
        } else {
          in_set_viol = true;
        }
      }
    }
    if (grew) {
      std::sort(set.begin(), set.end());
    } else if (in_set_viol) {
      tol *= 0.1;  // violations persist inside the set: sweep tolerance too loose
      if (tol < 1e-30) {
        res.converged = false;
        break;
      }
    } else {
      certified = true;
    }
  }
  if (!certified) res.converged = false;

  state.refresh_wr();
  for (int j = 0; j < p; ++j) res.gradient[j] = state.gradient(j);
  res.beta = state.beta();
  res.intercept = pen.intercept ? state.intercept() : 0.0;
  res.working_set = std::move(set);
  return res;
}

/// Objective of problem (internal scale), for tests and step-size checks.
inline double wls_objective(const WlsProblem& prob, const std::vector<double>& beta,
                            double intercept) {
  const detail::InternalScale sc = detail::make_internal_scale(prob);
  detail::CdState state(prob, sc);
  for (int j = 0; j < prob.X->cols(); ++j) state.set_coef(j, beta[j]);
  state.set_intercept(intercept);
  return state.objective(prob.lambda, *prob.penalty);
}

/// Per-feature gradient (1/n) sum_i w_i xt_ij r_i at the given coefficients.
inline std::vector<double> wls_gradient(const WlsProblem& prob, const std::vector<double>& beta,
                                        double intercept) {
  const detail::InternalScale sc = detail::make_internal_scale(prob);
  detail::CdState state(prob, sc);
  for (int j = 0; j < prob.X->cols(); ++j) state.set_coef(j, sc.excluded[j] ? 0.0 : beta[j]);
  state.set_intercept(intercept);
  state.refresh_wr();
  std::vector<double> g(prob.X->cols());
  for (int j = 0; j < prob.X->cols(); ++j) g[j] = state.gradient(j);
  return g;
}

}  // namespace enetpath
