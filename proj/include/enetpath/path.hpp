#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "enetpath/family.hpp"
#include "enetpath/matrix.hpp"
#include "enetpath/penalty.hpp"
#include "enetpath/pwls.hpp"

namespace enetpath {

struct PathOptions {
  int nlambda = 100;
  double lambda_min_ratio = 0.0;   // <= 0 selects 1e-2 when p > n, else 1e-4
  std::vector<double> lambda;      // user-supplied decreasing sequence; disables early stopping
  double outer_tol = 1e-8;         // on |dev_new - dev_old| / (0.1 + |dev_new|)
  int max_outer_iterations = 25;
  int max_halvings = 10;
  bool early_stop = true;          // applies to auto-generated sequences only
  PwlsOptions pwls;
};

/// Nonzero coefficients of one path point, indices ascending.
struct SparseCoefs {
  std::vector<int> index;
  std::vector<double> value;

  std::vector<double> densify(int p) const {
    std::vector<double> b(p, 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) b[index[k]] = value[k];
    return b;
  }
  int nnz() const { return static_cast<int>(index.size()); }
};

/**
 * A fitted regularization path. Coefficients are stored per lambda on the
 * original (unstandardized) scale; `outer_objectives` holds the accepted
 * penalized-objective sequence of each lambda's outer loop.
 */
struct PathFit {
  bool is_cox = false;
  std::optional<FamilySpec> family;
  std::vector<double> lambda;
  double lambda_max = 0.0;
  std::vector<double> intercepts;          // empty for Cox
  std::vector<SparseCoefs> coefficients;
  std::vector<double> dev_ratio;
  double null_deviance = 0.0;
  std::vector<long> n_passes;
  std::vector<char> converged;
  PenaltySpec penalty;
  ColumnStats stats;
  std::vector<std::vector<double>> outer_objectives;
  bool truncated = false;
  int n_obs = 0;

  int n_lambda() const { return static_cast<int>(lambda.size()); }
};

inline std::vector<double> lambda_sequence(double lmax, int nlambda, double min_ratio) {
  if (!(lmax > 0.0)) throw std::invalid_argument("lambda_sequence: lambda_max must be > 0");
  if (nlambda < 1) throw std::invalid_argument("lambda_sequence: nlambda must be >= 1");
  if (!(min_ratio > 0.0 && min_ratio < 1.0))
    throw std::invalid_argument("lambda_sequence: min_ratio outside (0,1)");
  std::vector<double> seq(nlambda);
  seq[0] = lmax;
  if (nlambda == 1) return seq;
  const double loglmax = std::log(lmax);
  const double step = std::log(min_ratio) / (nlambda - 1);
  for (int k = 1; k + 1 < nlambda; ++k) seq[k] = std::exp(loglmax + k * step);
  seq[nlambda - 1] = lmax * min_ratio;
  return seq;
}

/// deviance/(2n) + lambda * sum_j gamma_j ((1-alpha)/2 beta_j^2 + alpha |beta_j|).
/// `beta` is on whatever scale the penalty is applied to (internal scale
/// inside the fitting loop).
inline double glm_objective(const FamilySpec& f, const std::vector<double>& y,
                            const std::vector<double>& eta, const std::vector<double>& beta,
                            double lambda, const PenaltySpec& penalty, const Weights& obs_w) {
  std::vector<double> mu(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) mu[i] = f.clamp_mu(f.link_inverse(eta[i]));
  const double dev = deviance(f, y, mu, obs_w);
  if (!std::isfinite(dev)) throw std::runtime_error("objective: nonfinite deviance");
  return dev / (2.0 * y.size()) + penalty.value(lambda, beta);
}

namespace detail {

/// Linear predictor from internal-scale coefficients over the implicitly
/// standardized design, accumulated column-wise.
inline std::vector<double> internal_eta(const FeatureMatrix& X, const InternalScale& sc,
                                        const std::vector<double>& beta, double b0) {
  const int n = X.rows(), p = X.cols();
  double shift = 0.0;
  for (int j = 0; j < p; ++j)
    if (beta[j] != 0.0) shift += sc.center[j] * (beta[j] / sc.scale[j]);
  std::vector<double> eta(n, b0 - shift);
  for (int j = 0; j < p; ++j) {
    if (beta[j] == 0.0) continue;
    const double d = beta[j] / sc.scale[j];
    X.for_col(j, [&](int i, double x) { eta[i] += x * d; });
  }
  return eta;
}

inline SparseCoefs unstandardize(const std::vector<double>& beta, const InternalScale& sc,
                                 const PenaltySpec& pen, double b0, double* intercept_out) {
  SparseCoefs out;
  double shift = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    if (beta[j] == 0.0) continue;
    double orig = beta[j] / sc.scale[j];
    orig = std::clamp(orig, pen.lower[j], pen.upper[j]);
    out.index.push_back(static_cast<int>(j));
    out.value.push_back(orig);
    shift += sc.center[j] * orig;
  }
  if (intercept_out) *intercept_out = b0 - shift;
  return out;
}

struct GlmPathSetup {
  Weights obs_w;            // rescaled to sum n
  ColumnStats stats;
  InternalScale scale;
  double null_deviance = 0.0;
  double null_intercept = 0.0;       // g(weighted mean y), 0 when no intercept
  std::vector<double> beta0;         // internal scale, nonzero only on unpenalized features
  double b0 = 0.0;
  std::vector<double> eta0;
  double lambda_max = 0.0;           // 0 when undefined (constant response)
};

GlmPathSetup prepare_glm_path(const FeatureMatrix& X, const std::vector<double>& y,
                              const Weights& obs_w_in, const FamilySpec& family,
                              const PenaltySpec& penalty, const PathOptions& opts);

}  // namespace detail

PathFit fit_glm_path(const FeatureMatrix& X, const std::vector<double>& y,
                     const Weights& obs_w_in, const FamilySpec& family,
                     const PenaltySpec& penalty, const PathOptions& opts = {});

/// Smallest lambda whose solution keeps every penalized coefficient at zero.
inline double lambda_max(const FeatureMatrix& X, const std::vector<double>& y,
                         const Weights& obs_w, const FamilySpec& family,
                         const PenaltySpec& penalty) {
  const auto setup = detail::prepare_glm_path(X, y, obs_w, family, penalty, PathOptions{});
  if (setup.lambda_max <= 0.0)
    throw std::runtime_error("lambda_max: undefined (no penalized gradient; response constant?)");
  return setup.lambda_max;
}

namespace detail {

inline GlmPathSetup prepare_glm_path(const FeatureMatrix& X, const std::vector<double>& y,
                                     const Weights& obs_w_in, const FamilySpec& family,
                                     const PenaltySpec& penalty, const PathOptions& opts) {
  const int n = X.rows(), p = X.cols();
  if (n < 2) throw std::invalid_argument("fit: need at least 2 observations");
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("fit: response length mismatch");
  if (penalty.n_features() != p) throw std::invalid_argument("fit: penalty length mismatch");
  family.validate_response(y);

  GlmPathSetup s{obs_w_in.rescaled_to(static_cast<double>(n)),
                 ColumnStats{},
                 InternalScale{},
                 0.0,
                 0.0,
                 {},
                 0.0,
                 {},
                 0.0};
  s.stats = column_stats(X, s.obs_w);

  // null (intercept-only) fit: for any link the score is solved by the
  // weighted mean of y; without an intercept the null model is eta = 0
  std::vector<double> mu_null(n);
  if (penalty.intercept) {
    double mean = 0.0;
    const double wsum = s.obs_w.sum();
    for (int i = 0; i < n; ++i) mean += (s.obs_w[i] / wsum) * y[i];
    const double mu = family.clamp_mu(mean);
    s.null_intercept = family.link_eval(mu);
    std::fill(mu_null.begin(), mu_null.end(), mu);
  } else {
    s.null_intercept = 0.0;
    std::fill(mu_null.begin(), mu_null.end(), family.clamp_mu(family.link_inverse(0.0)));
  }
  s.null_deviance = deviance(family, y, mu_null, s.obs_w);

  // internal scale: center only when both standardizing and an intercept
  // absorbs the shift
  WlsProblem scaffold;
  scaffold.X = &X;
  scaffold.stats = &s.stats;
  scaffold.center = penalty.standardize && penalty.intercept;
  scaffold.penalty = &penalty;
  s.scale = make_internal_scale(scaffold);

  // starting state: unpenalized features (if any) fitted at lambda = 0,
  // otherwise the null model
  s.beta0.assign(p, 0.0);
  s.b0 = s.null_intercept;
  std::vector<int> unpen;
  for (int j = 0; j < p; ++j)
    if (penalty.factors[j] == 0.0 && !s.scale.excluded[j]) unpen.push_back(j);
  if (!unpen.empty()) {
    const FeatureMatrix subX = X.select_columns(unpen);
    std::vector<double> lo(unpen.size()), hi(unpen.size());
    for (std::size_t k = 0; k < unpen.size(); ++k) {
      lo[k] = penalty.lower[unpen[k]];
      hi[k] = penalty.upper[unpen[k]];
    }
    PenaltySpec subpen = PenaltySpec::make(static_cast<int>(unpen.size()), penalty.alpha, {},
                                           std::move(lo), std::move(hi), penalty.standardize,
                                           penalty.intercept);
    PathOptions subopts;
    subopts.lambda = {0.0};
    subopts.outer_tol = opts.outer_tol;
    subopts.max_outer_iterations = opts.max_outer_iterations;
    subopts.pwls = opts.pwls;
    const PathFit subfit = fit_glm_path(subX, y, s.obs_w, family, subpen, subopts);
    const std::vector<double> sub_beta = subfit.coefficients.back().densify(
        static_cast<int>(unpen.size()));
    for (std::size_t k = 0; k < unpen.size(); ++k) {
      const int j = unpen[k];
      s.beta0[j] = sub_beta[k] * s.scale.scale[j];  // back to internal scale
    }
    s.b0 = penalty.intercept ? subfit.intercepts.back() : 0.0;
    // rebuild internal intercept: original intercept plus center shift
    double shift = 0.0;
    for (int j = 0; j < p; ++j)
      if (s.beta0[j] != 0.0) shift += s.scale.center[j] * (s.beta0[j] / s.scale.scale[j]);
    s.b0 += shift;
  }
  s.eta0 = internal_eta(X, s.scale, s.beta0, s.b0);

  // gradient at the starting state defines lambda_max over penalized features
  const IrlsWorking work = irls_working(family, y, s.eta0, s.obs_w);
  WlsProblem prob = scaffold;
  prob.z = work.z;
  prob.w = work.w;
  const std::vector<double> g = wls_gradient(prob, s.beta0, s.b0);
  const double alpha_eff = std::max(penalty.alpha, 1e-3);
  double lmax = 0.0;
  for (int j = 0; j < p; ++j) {
    if (penalty.factors[j] <= 0.0 || s.scale.excluded[j]) continue;
    lmax = std::max(lmax, std::abs(g[j]) / (alpha_eff * penalty.factors[j]));
  }
  s.lambda_max = lmax;
  return s;
}

}  // namespace detail

inline PathFit fit_glm_path(const FeatureMatrix& X, const std::vector<double>& y,
                            const Weights& obs_w_in, const FamilySpec& family,
                            const PenaltySpec& penalty, const PathOptions& opts) {
  const int n = X.rows(), p = X.cols();
  auto setup = detail::prepare_glm_path(X, y, obs_w_in, family, penalty, opts);
  const Weights& obs_w = setup.obs_w;
  const detail::InternalScale& sc = setup.scale;

  const bool user_lambda = !opts.lambda.empty();
  std::vector<double> lambdas;
  if (user_lambda) {
    lambdas = opts.lambda;
    for (std::size_t k = 0; k + 1 < lambdas.size(); ++k)
      if (!(lambdas[k] > lambdas[k + 1]))
        throw std::invalid_argument("fit: user lambda sequence must be strictly decreasing");
    if (lambdas.front() < 0.0 || lambdas.back() < 0.0)
      throw std::invalid_argument("fit: negative lambda");
  } else {
    if (setup.lambda_max <= 0.0)
      throw std::runtime_error("fit: lambda_max undefined (response constant?)");
    double ratio = opts.lambda_min_ratio;
    if (ratio <= 0.0) ratio = p > n ? 1e-2 : 1e-4;
    lambdas = lambda_sequence(setup.lambda_max, opts.nlambda, ratio);
  }
  const double kkt_scale = setup.lambda_max > 0.0 ? setup.lambda_max
                                                  : std::max(lambdas.front(), 1.0);

  PathFit fit;
  fit.family = family;
  fit.penalty = penalty;
  fit.stats = setup.stats;
  fit.lambda_max = setup.lambda_max;
  fit.null_deviance = setup.null_deviance;
  fit.n_obs = n;

  std::vector<double> beta = setup.beta0;
  double b0 = setup.b0;
  std::vector<double> eta = setup.eta0;
  std::vector<double> mu(n);
  for (int i = 0; i < n; ++i) mu[i] = family.clamp_mu(family.link_inverse(eta[i]));
  double dev = deviance(family, y, mu, obs_w);
  std::vector<int> hint;

  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const double lam = lambdas[k];
    const double lam_prev = k == 0 ? lam : lambdas[k - 1];
    double obj = dev / (2.0 * n) + penalty.value(lam, beta);
    std::vector<double> objectives{obj};
    long passes = 0;
    bool lam_converged = false;
    bool diverged = false;

    for (int t = 0; t < opts.max_outer_iterations; ++t) {
      const IrlsWorking work = irls_working(family, y, eta, obs_w);
      WlsProblem prob;
      prob.X = &X;
      prob.stats = &setup.stats;
      prob.center = penalty.standardize && penalty.intercept;
      prob.z = work.z;
      prob.w = work.w;
      prob.penalty = &penalty;
      prob.lambda = lam;
      prob.lambda_prev = lam_prev;
      prob.warm_beta = beta;
      prob.warm_intercept = b0;
      prob.active_hint = hint;
      PwlsOptions popts = opts.pwls;
      popts.kkt_tol = 0.01 * opts.pwls.kkt_tol * kkt_scale;  // inner certification must beat the outer deviance test
      const PwlsResult res = solve_pwls(prob, popts);
      hint = res.working_set;
      passes += res.n_passes;

      std::vector<double> cand = res.beta;
      double cand_b0 = res.intercept;
      std::vector<double> cand_eta, cand_mu(n);
      double cand_dev = 0.0, cand_obj = 0.0;
      bool accepted = false;
      for (int h = 0; h <= opts.max_halvings; ++h) {
        cand_eta = detail::internal_eta(X, sc, cand, cand_b0);
        for (int i = 0; i < n; ++i) cand_mu[i] = family.clamp_mu(family.link_inverse(cand_eta[i]));
        cand_dev = deviance(family, y, cand_mu, obs_w);
        cand_obj = std::isfinite(cand_dev)
                       ? cand_dev / (2.0 * n) + penalty.value(lam, cand)
                       : std::numeric_limits<double>::infinity();
        if (std::isfinite(cand_obj) && cand_obj <= obj) {
          accepted = true;
          break;
        }
        for (int j = 0; j < p; ++j) cand[j] = 0.5 * (cand[j] + beta[j]);
        cand_b0 = 0.5 * (cand_b0 + b0);
      }
      if (!accepted) {
        // fully halved candidates sit at the current iterate; a vanishing
        // excess is convergence noise, a real one is divergence
        if (std::isfinite(cand_obj) && cand_obj - obj <= 1e-10 * (1.0 + std::abs(obj)))
          lam_converged = true;
        else
          diverged = true;
        break;
      }
      const double dev_old = dev;
      beta = std::move(cand);
      b0 = cand_b0;
      eta = std::move(cand_eta);
      mu = cand_mu;
      dev = cand_dev;
      obj = cand_obj;
      objectives.push_back(obj);
      if (std::abs(dev - dev_old) / (0.1 + std::abs(dev)) < opts.outer_tol) {
        lam_converged = true;
        break;
      }
    }

    if (diverged) {
      if (fit.lambda.empty())
        throw std::runtime_error("fit: diverged at the first lambda");
      fit.truncated = true;
      break;
    }

    double intercept_orig = 0.0;
    SparseCoefs coefs = detail::unstandardize(beta, sc, penalty, b0, &intercept_orig);
    fit.lambda.push_back(lam);
    fit.intercepts.push_back(penalty.intercept ? intercept_orig : 0.0);
    fit.coefficients.push_back(std::move(coefs));
    const double ratio =
        fit.null_deviance > 0.0 ? 1.0 - dev / fit.null_deviance : 0.0;
    fit.dev_ratio.push_back(ratio);
    fit.n_passes.push_back(passes);
    fit.converged.push_back(lam_converged ? 1 : 0);
    fit.outer_objectives.push_back(std::move(objectives));

    if (!user_lambda && opts.early_stop && fit.lambda.size() >= 2) {
      const std::size_t m = fit.dev_ratio.size();
      if (fit.dev_ratio[m - 1] > 0.999) break;
      if (fit.dev_ratio[m - 1] - fit.dev_ratio[m - 2] < 1e-5) break;
    }
  }
  return fit;
}

enum class PredictType { link, response, cls };

namespace detail {

struct LambdaLookup {
  int lo = 0, hi = 0;     // grid indices with lambda[hi] <= s <= lambda[lo]
  double frac = 1.0;      // weight on lo
  bool clamped = false;
};

inline LambdaLookup locate_lambda(const std::vector<double>& grid, double s) {
  LambdaLookup out;
  const int m = static_cast<int>(grid.size());
  for (int k = 0; k < m; ++k) {
    if (std::abs(s - grid[k]) <= 1e-12 * std::max(1.0, std::abs(grid[k]))) {
      out.lo = out.hi = k;
      return out;
    }
  }
  if (s >= grid.front()) {
    out.lo = out.hi = 0;
    out.clamped = s > grid.front();
    return out;
  }
  if (s <= grid.back()) {
    out.lo = out.hi = m - 1;
    out.clamped = s < grid.back();
    return out;
  }
  int k = 0;
  while (k + 1 < m && !(grid[k + 1] <= s)) ++k;
  out.lo = k;
  out.hi = k + 1;
  out.frac = (s - grid[k + 1]) / (grid[k] - grid[k + 1]);
  return out;
}

}  // namespace detail

/// Coefficients at s: stored vectors at grid points, linear interpolation
/// in lambda between them, clamped at the ends of the path.
inline std::vector<double> coefficients_at(const PathFit& fit, double s, double* intercept_out,
                                           bool* clamped = nullptr) {
  if (fit.lambda.empty()) throw std::invalid_argument("predict: empty path");
  const int p = fit.penalty.n_features();
  const auto loc = detail::locate_lambda(fit.lambda, s);
  if (clamped) *clamped = *clamped || loc.clamped;
  std::vector<double> beta = fit.coefficients[loc.lo].densify(p);
  double b0 = fit.intercepts.empty() ? 0.0 : fit.intercepts[loc.lo];
  if (loc.hi != loc.lo) {
    const std::vector<double> beta_hi = fit.coefficients[loc.hi].densify(p);
    for (int j = 0; j < p; ++j) beta[j] = loc.frac * beta[j] + (1.0 - loc.frac) * beta_hi[j];
    if (!fit.intercepts.empty())
      b0 = loc.frac * b0 + (1.0 - loc.frac) * fit.intercepts[loc.hi];
  }
  if (intercept_out) *intercept_out = b0;
  return beta;
}

/**
 * Predictions over new data, one column per requested lambda.
 * type=link returns eta; response applies the inverse link (exp for Cox);
 * class thresholds the binomial response at 0.5 (ties to 1).
 */
inline std::vector<std::vector<double>> predict_path(const PathFit& fit,
                                                     const FeatureMatrix& newX,
                                                     const std::vector<double>& s,
                                                     PredictType type = PredictType::link,
                                                     bool* clamped = nullptr) {
  if (newX.cols() != fit.penalty.n_features())
    throw std::invalid_argument("predict: newX column count mismatch");
  if (type == PredictType::cls && (fit.is_cox || !fit.family || !fit.family->is_binomial_like()))
    throw std::invalid_argument("predict: class predictions require a binomial family");
  std::vector<std::vector<double>> out;
  out.reserve(s.size());
  for (double sv : s) {
    double b0 = 0.0;
    const std::vector<double> beta = coefficients_at(fit, sv, &b0, clamped);
    std::vector<double> eta = predict_linear(newX, beta, b0);
    switch (type) {
      case PredictType::link:
        break;
      case PredictType::response:
        for (double& e : eta) e = fit.is_cox ? std::exp(e) : fit.family->link_inverse(e);
        break;
      case PredictType::cls:
        for (double& e : eta) e = fit.family->link_inverse(e) >= 0.5 ? 1.0 : 0.0;
        break;
    }
    out.push_back(std::move(eta));
  }
  return out;
}

}  // namespace enetpath
