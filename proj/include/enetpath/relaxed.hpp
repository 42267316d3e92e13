#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "enetpath/cox.hpp"
#include "enetpath/path.hpp"

namespace enetpath {

/**
 * Simplified relaxed elastic net: the base penalized path plus, for every
 * distinct active set along it, an unpenalized refit on those columns.
 * Identical active sets share one refit; failed refits (|A| >= n, divergence)
 * fall back to the base estimate and are flagged.
 */
struct RelaxedFit {
  PathFit base;
  std::vector<SparseCoefs> refit_coefficients;  // per lambda, padded with zeros
  std::vector<double> refit_intercepts;         // zeros for Cox
  std::vector<char> refit_ok;
  int n_refits = 0;          // distinct refits actually fitted
  bool alpha_warning = false;  // relaxation with alpha < 1 is discouraged

  int n_lambda() const { return base.n_lambda(); }
};

/// gamma * base + (1 - gamma) * refit, exact at the endpoints.
inline std::vector<double> blend(const std::vector<double>& base_beta,
                                 const std::vector<double>& refit_beta, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("blend: gamma outside [0,1]");
  if (base_beta.size() != refit_beta.size())
    throw std::invalid_argument("blend: length mismatch");
  if (gamma == 1.0) return base_beta;
  if (gamma == 0.0) return refit_beta;
  std::vector<double> out(base_beta.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = gamma * base_beta[j] + (1.0 - gamma) * refit_beta[j];
  return out;
}

inline double blend_scalar(double base, double refit, double gamma) {
  if (gamma == 1.0) return base;
  if (gamma == 0.0) return refit;
  return gamma * base + (1.0 - gamma) * refit;
}

namespace detail {

struct RefitOutcome {
  SparseCoefs coefs;
  double intercept = 0.0;
  bool ok = false;
};

template <class RefitOne>
void relax_path(const FeatureMatrix& X, const PenaltySpec& penalty, RelaxedFit& out,
                RefitOne&& refit_one) {
  const int n = X.rows();
  std::vector<int> always_active;
  for (int j = 0; j < penalty.n_features(); ++j)
    if (penalty.factors[j] == 0.0) always_active.push_back(j);

  std::map<std::vector<int>, int> cache;  // active-set signature -> refit slot
  std::vector<RefitOutcome> outcomes;
  for (int k = 0; k < out.base.n_lambda(); ++k) {
    std::vector<int> active = out.base.coefficients[k].index;
    active.insert(active.end(), always_active.begin(), always_active.end());
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());

    auto [it, fresh] = cache.try_emplace(active, static_cast<int>(outcomes.size()));
    if (fresh) {
      RefitOutcome oc;
      if (static_cast<int>(active.size()) >= n) {
        oc.ok = false;  // saturated refit cannot be identified
      } else {
        oc = refit_one(active);
      }
      outcomes.push_back(std::move(oc));
      ++out.n_refits;
    }
    const RefitOutcome& oc = outcomes[it->second];
    if (oc.ok) {
      out.refit_coefficients.push_back(oc.coefs);
      out.refit_intercepts.push_back(oc.intercept);
      out.refit_ok.push_back(1);
    } else {
      out.refit_coefficients.push_back(out.base.coefficients[k]);
      out.refit_intercepts.push_back(out.base.intercepts.empty() ? 0.0
                                                                 : out.base.intercepts[k]);
      out.refit_ok.push_back(0);
    }
  }
}

inline PenaltySpec subset_penalty(const PenaltySpec& penalty, const std::vector<int>& cols) {
  std::vector<double> lo, hi;
  for (int j : cols) {
    lo.push_back(penalty.lower[j]);
    hi.push_back(penalty.upper[j]);
  }
  return PenaltySpec::make(static_cast<int>(cols.size()), penalty.alpha, {}, std::move(lo),
                           std::move(hi), penalty.standardize, penalty.intercept);
}

inline SparseCoefs scatter_coefs(const SparseCoefs& sub, const std::vector<int>& cols) {
  SparseCoefs out;
  for (std::size_t t = 0; t < sub.index.size(); ++t) {
    out.index.push_back(cols[sub.index[t]]);
    out.value.push_back(sub.value[t]);
  }
  return out;
}

}  // namespace detail

inline RelaxedFit fit_relaxed(const FeatureMatrix& X, const std::vector<double>& y,
                              const Weights& obs_w, const FamilySpec& family,
                              const PenaltySpec& penalty, const PathOptions& opts = {}) {
  RelaxedFit out;
  out.alpha_warning = penalty.alpha < 1.0;
  out.base = fit_glm_path(X, y, obs_w, family, penalty, opts);
  detail::relax_path(X, penalty, out, [&](const std::vector<int>& active) {
    detail::RefitOutcome oc;
    try {
      if (active.empty()) {
        // intercept-only model
        const auto setup = detail::prepare_glm_path(X, y, obs_w, family, penalty, opts);
        oc.intercept = penalty.intercept ? setup.null_intercept : 0.0;
        oc.ok = true;
        return oc;
      }
      const FeatureMatrix subX = X.select_columns(active);
      PathOptions ropts;
      ropts.lambda = {0.0};
      ropts.outer_tol = opts.outer_tol;
      ropts.max_outer_iterations = opts.max_outer_iterations;
      ropts.max_halvings = opts.max_halvings;
      ropts.pwls = opts.pwls;
      const PathFit refit = fit_glm_path(subX, y, obs_w, family,
                                         detail::subset_penalty(penalty, active), ropts);
      if (refit.n_lambda() != 1 || !refit.converged.back()) return oc;
      oc.coefs = detail::scatter_coefs(refit.coefficients[0], active);
      oc.intercept = penalty.intercept ? refit.intercepts[0] : 0.0;
      oc.ok = true;
    } catch (const std::exception&) {
      oc.ok = false;
    }
    return oc;
  });
  return out;
}

inline RelaxedFit fit_relaxed_cox(const FeatureMatrix& X, const SurvivalResponse& surv,
                                  const Weights& obs_w, const PenaltySpec& penalty,
                                  const PathOptions& opts = {}) {
  RelaxedFit out;
  out.alpha_warning = penalty.alpha < 1.0;
  out.base = fit_cox_path(X, surv, obs_w, penalty, opts);
  detail::relax_path(X, penalty, out, [&](const std::vector<int>& active) {
    detail::RefitOutcome oc;
    try {
      if (active.empty()) {
        oc.ok = true;  // the null Cox model has no parameters
        return oc;
      }
      const FeatureMatrix subX = X.select_columns(active);
      PathOptions ropts;
      ropts.lambda = {0.0};
      ropts.outer_tol = opts.outer_tol;
      ropts.max_outer_iterations = opts.max_outer_iterations;
      ropts.max_halvings = opts.max_halvings;
      ropts.pwls = opts.pwls;
      const PathFit refit = fit_cox_path(subX, surv, obs_w,
                                         detail::subset_penalty(penalty, active), ropts);
      if (refit.n_lambda() != 1 || !refit.converged.back()) return oc;
      oc.coefs = detail::scatter_coefs(refit.coefficients[0], active);
      oc.ok = true;
    } catch (const std::exception&) {
      oc.ok = false;
    }
    return oc;
  });
  return out;
}

/// Blended coefficients at path value s (both paths interpolated in lambda).
inline std::vector<double> relaxed_coefficients_at(const RelaxedFit& fit, double s,
                                                   double gamma, double* intercept_out,
                                                   bool* clamped = nullptr) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("predict: gamma outside [0,1]");
  double b0_base = 0.0;
  std::vector<double> beta_base = coefficients_at(fit.base, s, &b0_base, clamped);

  PathFit refit_view;  // reuse the lambda interpolation over the refit vectors
  refit_view.lambda = fit.base.lambda;
  refit_view.intercepts = fit.refit_intercepts;
  refit_view.coefficients = fit.refit_coefficients;
  refit_view.penalty = fit.base.penalty;
  double b0_refit = 0.0;
  std::vector<double> beta_refit = coefficients_at(refit_view, s, &b0_refit, nullptr);

  std::vector<double> beta = blend(beta_base, beta_refit, gamma);
  if (intercept_out)
    *intercept_out = fit.base.is_cox ? 0.0 : blend_scalar(b0_base, b0_refit, gamma);
  return beta;
}

/**
 * Predictions from the gamma-blend: the convex combination is taken on the
 * link scale, then transformed for response/class types.
 */
inline std::vector<std::vector<double>> predict_relaxed(const RelaxedFit& fit,
                                                        const FeatureMatrix& newX,
                                                        const std::vector<double>& s,
                                                        double gamma,
                                                        PredictType type = PredictType::link,
                                                        bool* clamped = nullptr) {
  if (newX.cols() != fit.base.penalty.n_features())
    throw std::invalid_argument("predict: newX column count mismatch");
  if (type == PredictType::cls &&
      (fit.base.is_cox || !fit.base.family || !fit.base.family->is_binomial_like()))
    throw std::invalid_argument("predict: class predictions require a binomial family");
  std::vector<std::vector<double>> out;
  for (double sv : s) {
    double b0 = 0.0;
    const std::vector<double> beta = relaxed_coefficients_at(fit, sv, gamma, &b0, clamped);
    std::vector<double> eta = predict_linear(newX, beta, b0);
    switch (type) {
      case PredictType::link:
        break;
      case PredictType::response:
        for (double& e : eta)
          e = fit.base.is_cox ? std::exp(e) : fit.base.family->link_inverse(e);
        break;
      case PredictType::cls:
        for (double& e : eta) e = fit.base.family->link_inverse(e) >= 0.5 ? 1.0 : 0.0;
        break;
    }
    out.push_back(std::move(eta));
  }
  return out;
}

}  // namespace enetpath
