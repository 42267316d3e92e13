#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "enetpath/matrix.hpp"
#include "enetpath/path.hpp"
#include "enetpath/penalty.hpp"
#include "enetpath/pwls.hpp"

namespace enetpath {

/**
 * Right-censored or (start,stop] survival response with optional strata.
 * Construction caches, per stratum: observation order by ascending stop time
 * (failures before censorings on ties), order by ascending start time, and
 * the unique failure times with death index sets. Caches are orderings only;
 * observation weights enter at evaluation time.
 */
class SurvivalResponse {
 public:
  static SurvivalResponse right_censored(std::vector<double> stop, std::vector<int> status,
                                         std::vector<int> strata = {}) {
    std::vector<double> start(stop.size(), 0.0);
    return SurvivalResponse(std::move(start), std::move(stop), std::move(status),
                            std::move(strata), false);
  }

  static SurvivalResponse start_stop(std::vector<double> start, std::vector<double> stop,
                                     std::vector<int> status, std::vector<int> strata = {}) {
    return SurvivalResponse(std::move(start), std::move(stop), std::move(status),
                            std::move(strata), true);
  }

  int size() const { return static_cast<int>(stop_.size()); }
  bool has_start_times() const { return has_start_; }
  int n_strata() const { return static_cast<int>(strata_ids_.size()); }
  const std::vector<double>& start() const { return start_; }
  const std::vector<double>& stop() const { return stop_; }
  const std::vector<int>& status() const { return status_; }
  const std::vector<int>& strata() const { return strata_; }
  const std::vector<int>& strata_ids() const { return strata_ids_; }

  /// True iff observation j is at risk at time t: start_j < t <= stop_j.
  bool risk_at(int j, double t) const { return start_[j] < t && t <= stop_[j]; }

  int total_failures() const {
    int c = 0;
    for (int s : status_) c += s;
    return c;
  }

  struct Stratum {
    std::vector<int> by_stop;   // observation ids, ascending stop, failures first on ties
    std::vector<int> by_start;  // observation ids, ascending start
    std::vector<double> fail_times;
    std::vector<std::vector<int>> deaths;  // observation ids failing at each time
    std::vector<int> fail_pos;   // first by_stop position with stop >= fail time
    std::vector<int> n_fail_le;  // per by_stop position: #fail times <= that stop
  };
  const std::vector<Stratum>& strata_cache() const { return cache_; }

  SurvivalResponse subset(const std::vector<int>& rows) const {
    std::vector<double> st, sp;
    std::vector<int> du, gr;
    for (int i : rows) {
      st.push_back(start_[i]);
      sp.push_back(stop_[i]);
      du.push_back(status_[i]);
      gr.push_back(strata_[i]);
    }
    return has_start_ ? start_stop(std::move(st), std::move(sp), std::move(du), std::move(gr))
                      : right_censored(std::move(sp), std::move(du), std::move(gr));
  }

 private:
  SurvivalResponse(std::vector<double> start, std::vector<double> stop,
                   std::vector<int> status, std::vector<int> strata, bool has_start)
      : start_(std::move(start)), stop_(std::move(stop)), status_(std::move(status)),
        strata_(std::move(strata)), has_start_(has_start) {
    const int n = static_cast<int>(stop_.size());
    if (n == 0) throw std::invalid_argument("survival: empty response");
    if (start_.size() != stop_.size() || status_.size() != stop_.size())
      throw std::invalid_argument("survival: length mismatch");
    if (strata_.empty()) strata_.assign(n, 0);
    if (strata_.size() != stop_.size())
      throw std::invalid_argument("survival: strata length mismatch");
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(start_[i]) || !std::isfinite(stop_[i]))
        throw std::invalid_argument("survival: nonfinite time at row " + std::to_string(i));
      if (!(start_[i] >= 0.0) || !(stop_[i] > start_[i]))
        throw std::invalid_argument("survival: need stop > start >= 0 at row " +
                                    std::to_string(i));
      if (status_[i] != 0 && status_[i] != 1)
        throw std::invalid_argument("survival: status must be 0 or 1 at row " +
                                    std::to_string(i));
    }
    std::vector<int> ids(strata_);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    strata_ids_ = ids;
    cache_.resize(strata_ids_.size());
    for (std::size_t g = 0; g < strata_ids_.size(); ++g) build_stratum(g);
  }

  void build_stratum(std::size_t g) {
    Stratum& st = cache_[g];
    const int label = strata_ids_[g];
    for (int i = 0; i < size(); ++i)
      if (strata_[i] == label) st.by_stop.push_back(i);
    st.by_start = st.by_stop;
    std::sort(st.by_stop.begin(), st.by_stop.end(), [&](int a, int b) {
      if (stop_[a] != stop_[b]) return stop_[a] < stop_[b];
      if (status_[a] != status_[b]) return status_[a] > status_[b];  // failures first
      return a < b;
    });
    std::sort(st.by_start.begin(), st.by_start.end(), [&](int a, int b) {
      if (start_[a] != start_[b]) return start_[a] < start_[b];
      return a < b;
    });
    for (std::size_t pos = 0; pos < st.by_stop.size(); ++pos) {
      const int i = st.by_stop[pos];
      if (status_[i] == 1) {
        if (st.fail_times.empty() || stop_[i] != st.fail_times.back()) {
          st.fail_times.push_back(stop_[i]);
          st.deaths.emplace_back();
        }
        st.deaths.back().push_back(i);
      }
    }
    st.fail_pos.resize(st.fail_times.size());
    {
      int pos = 0;
      for (std::size_t q = 0; q < st.fail_times.size(); ++q) {
        while (stop_[st.by_stop[pos]] < st.fail_times[q]) ++pos;
        st.fail_pos[q] = pos;
      }
    }
    st.n_fail_le.resize(st.by_stop.size());
    {
      std::size_t q = 0;
      for (std::size_t pos = 0; pos < st.by_stop.size(); ++pos) {
        while (q < st.fail_times.size() && st.fail_times[q] <= stop_[st.by_stop[pos]]) ++q;
        st.n_fail_le[pos] = static_cast<int>(q);
      }
    }
  }

  std::vector<double> start_, stop_;
  std::vector<int> status_;
  std::vector<int> strata_;
  std::vector<int> strata_ids_;
  bool has_start_ = false;
  std::vector<Stratum> cache_;
};

/// Score, curvature diagonal, and working response of one proximal-Newton
/// step on the Breslow partial likelihood.
struct CoxDerivatives {
  std::vector<double> grad;   // d log partial likelihood / d eta_k
  std::vector<double> wdiag;  // -d^2/d eta_k^2, clamped at 0
  std::vector<double> z;      // eta_k + grad_k / wdiag_k (eta_k where wdiag_k = 0)
};

namespace cox_detail {

struct RiskSums {
  std::vector<double> rss;    // per failure time: sum of w e^eta over the risk set
  std::vector<double> dmass;  // per failure time: weighted death mass
};

/// Weighted risk-set sums per failure time: a suffix sweep over stop-ordered
/// observations, plus (for (start,stop] data) a two-pointer correction that
/// removes late entrants, r_j = w_j e^{eta_j}.
inline RiskSums stratum_risk_sums(const SurvivalResponse& surv,
                                  const SurvivalResponse::Stratum& st,
                                  const std::vector<double>& r, const std::vector<double>& w,
                                  bool start_correction) {
  const int ns = static_cast<int>(st.by_stop.size());
  const int m = static_cast<int>(st.fail_times.size());
  RiskSums out;
  out.rss.assign(m, 0.0);
  out.dmass.assign(m, 0.0);
  if (m == 0) return out;
  std::vector<double> suf(ns + 1, 0.0);
  for (int pos = ns - 1; pos >= 0; --pos) suf[pos] = suf[pos + 1] + r[st.by_stop[pos]];
  for (int q = 0; q < m; ++q) {
    out.rss[q] = suf[st.fail_pos[q]];
    double d = 0.0;
    for (int i : st.deaths[q]) d += w[i];
    out.dmass[q] = d;
  }
  if (start_correction) {
    double curr = 0.0;
    int q = m - 1, si = ns - 1;
    while (q >= 0) {
      if (si >= 0 && surv.start()[st.by_start[si]] >= st.fail_times[q]) {
        curr += r[st.by_start[si]];
        --si;
      } else {
        out.rss[q] -= curr;
        --q;
      }
    }
  }
  return out;
}

inline void stratum_derivatives(const SurvivalResponse& surv,
                                const SurvivalResponse::Stratum& st,
                                const std::vector<double>& eta, const std::vector<double>& w,
                                bool start_correction, CoxDerivatives& out) {
  const int ns = static_cast<int>(st.by_stop.size());
  const int m = static_cast<int>(st.fail_times.size());
  std::vector<double> r(eta.size(), 0.0);
  for (int i : st.by_stop) r[i] = w[i] * std::exp(eta[i]);
  const RiskSums sums = stratum_risk_sums(surv, st, r, w, start_correction);

  // prefix sums over failure times of d/RSS and d/RSS^2
  std::vector<double> rd(m + 1, 0.0), rdsq(m + 1, 0.0);
  for (int q = 0; q < m; ++q) {
    const double term = sums.dmass[q] > 0.0 ? sums.dmass[q] / sums.rss[q] : 0.0;
    const double termsq =
        sums.dmass[q] > 0.0 ? sums.dmass[q] / (sums.rss[q] * sums.rss[q]) : 0.0;
    rd[q + 1] = rd[q] + term;
    rdsq[q + 1] = rdsq[q] + termsq;
  }

  std::vector<double> rsk(eta.size(), 0.0), rsksq(eta.size(), 0.0);
  for (int pos = 0; pos < ns; ++pos) {
    const int i = st.by_stop[pos];
    rsk[i] = rd[st.n_fail_le[pos]];
    rsksq[i] = rdsq[st.n_fail_le[pos]];
  }
  if (start_correction) {
    double curr = 0.0, currsq = 0.0;
    int q = 0, si = 0;
    while (si < ns) {
      const int i = st.by_start[si];
      if (q < m && st.fail_times[q] <= surv.start()[i]) {
        const double term = sums.dmass[q] > 0.0 ? sums.dmass[q] / sums.rss[q] : 0.0;
        const double termsq =
            sums.dmass[q] > 0.0 ? sums.dmass[q] / (sums.rss[q] * sums.rss[q]) : 0.0;
        curr += term;
        currsq += termsq;
        ++q;
      } else {
        rsk[i] -= curr;
        rsksq[i] -= currsq;
        ++si;
      }
    }
  }

  for (int pos = 0; pos < ns; ++pos) {
    const int i = st.by_stop[pos];
    const double g = w[i] * surv.status()[i] - r[i] * rsk[i];
    double wd = r[i] * rsk[i] - r[i] * r[i] * rsksq[i];
    if (wd < 0.0) wd = 0.0;  // rounding; true curvature is nonnegative
    out.grad[i] = g;
    out.wdiag[i] = wd;
    out.z[i] = wd > 0.0 ? eta[i] + g / wd : eta[i];
  }
}

inline std::vector<double> uniform_weights(int n) { return std::vector<double>(n, 1.0); }

}  // namespace cox_detail

/// O(n) nested-risk-set sweep for right-censored data (all starts zero).
inline CoxDerivatives cox_derivatives_rc(const SurvivalResponse& surv,
                                         const std::vector<double>& eta,
                                         const std::vector<double>& w = {}) {
  const int n = surv.size();
  if (static_cast<int>(eta.size()) != n)
    throw std::invalid_argument("cox_derivatives: eta length mismatch");
  for (double s : surv.start())
    if (s != 0.0)
      throw std::invalid_argument("cox_derivatives_rc: nonzero start times; use the (start,stop] path");
  const std::vector<double> wts = w.empty() ? cox_detail::uniform_weights(n) : w;
  CoxDerivatives out;
  out.grad.assign(n, 0.0);
  out.wdiag.assign(n, 0.0);
  out.z = eta;
  for (const auto& st : surv.strata_cache())
    cox_detail::stratum_derivatives(surv, st, eta, wts, false, out);
  return out;
}

/// O(n log n) first call / O(n) cached sweep for (start,stop] data.
inline CoxDerivatives cox_derivatives_ss(const SurvivalResponse& surv,
                                         const std::vector<double>& eta,
                                         const std::vector<double>& w = {}) {
  const int n = surv.size();
  if (static_cast<int>(eta.size()) != n)
    throw std::invalid_argument("cox_derivatives: eta length mismatch");
  const std::vector<double> wts = w.empty() ? cox_detail::uniform_weights(n) : w;
  CoxDerivatives out;
  out.grad.assign(n, 0.0);
  out.wdiag.assign(n, 0.0);
  out.z = eta;
  for (const auto& st : surv.strata_cache())
    cox_detail::stratum_derivatives(surv, st, eta, wts, true, out);
  return out;
}

inline CoxDerivatives cox_derivatives(const SurvivalResponse& surv,
                                      const std::vector<double>& eta,
                                      const std::vector<double>& w = {}) {
  return surv.has_start_times() ? cox_derivatives_ss(surv, eta, w)
                                : cox_derivatives_rc(surv, eta, w);
}

/**
 * (2/n) sum over strata and failure times of
 * [ -sum_{deaths} w eta + d log(sum_{risk set} w e^eta) ]
 * (Breslow tie handling; weighted death mass d).
 */
inline double neg_log_partial_likelihood(const SurvivalResponse& surv,
                                         const std::vector<double>& eta,
                                         const std::vector<double>& w = {}) {
  const int n = surv.size();
  if (static_cast<int>(eta.size()) != n)
    throw std::invalid_argument("neg_log_partial_likelihood: eta length mismatch");
  const std::vector<double> wts = w.empty() ? cox_detail::uniform_weights(n) : w;
  double total = 0.0;
  for (const auto& st : surv.strata_cache()) {
    std::vector<double> r(n, 0.0);
    for (int i : st.by_stop) r[i] = wts[i] * std::exp(eta[i]);
    const auto sums =
        cox_detail::stratum_risk_sums(surv, st, r, wts, surv.has_start_times());
    for (std::size_t q = 0; q < st.fail_times.size(); ++q) {
      double dsum = 0.0;
      for (int i : st.deaths[q]) dsum += wts[i] * eta[i];
      total -= dsum;
      if (sums.dmass[q] > 0.0) total += sums.dmass[q] * std::log(sums.rss[q]);
    }
  }
  return 2.0 * total / n;
}

/// Saturated Breslow log partial likelihood: -sum_i d_i log d_i.
inline double cox_saturated_loglik(const SurvivalResponse& surv,
                                   const std::vector<double>& w = {}) {
  const std::vector<double> wts = w.empty() ? cox_detail::uniform_weights(surv.size()) : w;
  double lsat = 0.0;
  for (const auto& st : surv.strata_cache()) {
    for (const auto& deaths : st.deaths) {
      double d = 0.0;
      for (int i : deaths) d += wts[i];
      if (d > 0.0) lsat -= d * std::log(d);
    }
  }
  return lsat;
}

/// 2 (saturated - attained) log partial likelihood.
inline double cox_deviance(const SurvivalResponse& surv, const std::vector<double>& eta,
                           const std::vector<double>& w = {}) {
  return 2.0 * cox_saturated_loglik(surv, w) +
         surv.size() * neg_log_partial_likelihood(surv, eta, w);
}

/**
 * Elastic-net regularized Cox path: proximal Newton with the diagonal-Hessian
 * working response, shared penalized WLS inner solver, no intercept, strata
 * contributing independent risk sets.
 */
inline PathFit fit_cox_path(const FeatureMatrix& X, const SurvivalResponse& surv,
                            const Weights& obs_w_in, const PenaltySpec& penalty_in,
                            const PathOptions& opts = {}) {
  const int n = X.rows(), p = X.cols();
  if (surv.size() != n) throw std::invalid_argument("fit_cox_path: response length mismatch");
  if (n < 2) throw std::invalid_argument("fit_cox_path: need at least 2 observations");
  if (penalty_in.n_features() != p)
    throw std::invalid_argument("fit_cox_path: penalty length mismatch");
  if (surv.total_failures() == 0)
    throw std::invalid_argument("fit_cox_path: no failures; partial likelihood is vacuous");

  PenaltySpec penalty = penalty_in;
  penalty.intercept = false;  // no intercept in the partial likelihood
  const Weights obs_w = obs_w_in.rescaled_to(static_cast<double>(n));
  const std::vector<double>& wv = obs_w.values();

  PathFit fit;
  fit.is_cox = true;
  fit.penalty = penalty;
  fit.stats = column_stats(X, obs_w);
  fit.n_obs = n;

  WlsProblem scaffold;
  scaffold.X = &X;
  scaffold.stats = &fit.stats;
  scaffold.center = penalty.standardize;  // partial likelihood is translation invariant
  scaffold.penalty = &penalty;
  const detail::InternalScale sc = detail::make_internal_scale(scaffold);

  std::vector<double> beta(p, 0.0);
  std::vector<double> eta(n, 0.0);
  CoxDerivatives deriv = cox_derivatives(surv, eta, wv);
  double dev = cox_deviance(surv, eta, wv);
  fit.null_deviance = dev;

  {
    WlsProblem prob = scaffold;
    prob.z = deriv.z;
    prob.w = deriv.wdiag;
    const std::vector<double> g = wls_gradient(prob, beta, 0.0);
    const double alpha_eff = std::max(penalty.alpha, 1e-3);
    double lmax = 0.0;
    for (int j = 0; j < p; ++j) {
      if (penalty.factors[j] <= 0.0 || sc.excluded[j]) continue;
      lmax = std::max(lmax, std::abs(g[j]) / (alpha_eff * penalty.factors[j]));
    }
    fit.lambda_max = lmax;
  }

  const bool user_lambda = !opts.lambda.empty();
  std::vector<double> lambdas;
  if (user_lambda) {
    lambdas = opts.lambda;
    for (std::size_t k = 0; k + 1 < lambdas.size(); ++k)
      if (!(lambdas[k] > lambdas[k + 1]))
        throw std::invalid_argument("fit_cox_path: user lambda sequence must be strictly decreasing");
  } else {
    if (fit.lambda_max <= 0.0)
      throw std::runtime_error("fit_cox_path: lambda_max undefined");
    double ratio = opts.lambda_min_ratio;
    if (ratio <= 0.0) ratio = p > n ? 1e-2 : 1e-4;
    lambdas = lambda_sequence(fit.lambda_max, opts.nlambda, ratio);
  }
  const double kkt_scale =
      fit.lambda_max > 0.0 ? fit.lambda_max : std::max(lambdas.front(), 1.0);

  std::vector<int> hint;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const double lam = lambdas[k];
    const double lam_prev = k == 0 ? lam : lambdas[k - 1];
    double obj = 0.5 * neg_log_partial_likelihood(surv, eta, wv) + penalty.value(lam, beta);
    std::vector<double> objectives{obj};
    long passes = 0;
    bool lam_converged = false;
    bool diverged = false;

    for (int t = 0; t < opts.max_outer_iterations; ++t) {
      deriv = cox_derivatives(surv, eta, wv);
      WlsProblem prob = scaffold;
      prob.z = deriv.z;
      prob.w = deriv.wdiag;
      prob.lambda = lam;
      prob.lambda_prev = lam_prev;
      prob.warm_beta = beta;
      prob.warm_intercept = 0.0;
      prob.active_hint = hint;
      PwlsOptions popts = opts.pwls;
      popts.kkt_tol = 0.01 * opts.pwls.kkt_tol * kkt_scale;  // inner certification must beat the outer deviance test
      const PwlsResult res = solve_pwls(prob, popts);
      hint = res.working_set;
      passes += res.n_passes;

      std::vector<double> cand = res.beta;
      std::vector<double> cand_eta;
      double cand_obj = 0.0, cand_nlpl = 0.0;
      bool accepted = false;
      for (int h = 0; h <= opts.max_halvings; ++h) {
        cand_eta = detail::internal_eta(X, sc, cand, 0.0);
        cand_nlpl = neg_log_partial_likelihood(surv, cand_eta, wv);
        cand_obj = std::isfinite(cand_nlpl)
                       ? 0.5 * cand_nlpl + penalty.value(lam, cand)
                       : std::numeric_limits<double>::infinity();
        if (std::isfinite(cand_obj) && cand_obj <= obj) {
          accepted = true;
          break;
        }
        for (int j = 0; j < p; ++j) cand[j] = 0.5 * (cand[j] + beta[j]);
      }
      if (!accepted) {
        if (std::isfinite(cand_obj) && cand_obj - obj <= 1e-10 * (1.0 + std::abs(obj)))
          lam_converged = true;
        else
          diverged = true;
        break;
      }
      const double dev_old = dev;
      beta = std::move(cand);
      eta = std::move(cand_eta);
      dev = 2.0 * cox_saturated_loglik(surv, wv) + n * cand_nlpl;
      obj = cand_obj;
      objectives.push_back(obj);
      if (std::abs(dev - dev_old) / (0.1 + std::abs(dev)) < opts.outer_tol) {
        lam_converged = true;
        break;
      }
    }

    if (diverged) {
      if (fit.lambda.empty()) throw std::runtime_error("fit_cox_path: diverged at the first lambda");
      fit.truncated = true;
      break;
    }

    SparseCoefs coefs = detail::unstandardize(beta, sc, penalty, 0.0, nullptr);
    fit.lambda.push_back(lam);
    fit.coefficients.push_back(std::move(coefs));
    fit.dev_ratio.push_back(fit.null_deviance > 0.0 ? 1.0 - dev / fit.null_deviance : 0.0);
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

/// Breslow baseline cumulative-hazard increments of one stratum.
struct HazardCurve {
  int stratum = 0;                  // stratum label
  std::vector<double> times;        // unique failure times, ascending
  std::vector<double> increments;   // d_i / sum_{risk set} w e^eta
};

/**
 * Breslow baseline hazard at path value s, computed from the original
 * training data: dLambda_0(t_i) = d_i / sum_{j in R_i} w_j e^{eta_j}.
 */
inline std::vector<HazardCurve> baseline_hazard(const PathFit& fit, double s,
                                                const FeatureMatrix& X,
                                                const SurvivalResponse& surv,
                                                const Weights& obs_w = Weights({1.0})) {
  if (!fit.is_cox) throw std::invalid_argument("baseline_hazard: not a Cox fit");
  if (X.rows() != surv.size())
    throw std::invalid_argument("baseline_hazard: design/response mismatch");
  const Weights w = obs_w.size() == static_cast<std::size_t>(surv.size())
                        ? obs_w.rescaled_to(static_cast<double>(surv.size()))
                        : Weights::uniform(surv.size());
  const std::vector<double> eta =
      predict_path(fit, X, {s}, PredictType::link).front();
  std::vector<HazardCurve> out;
  for (std::size_t g = 0; g < surv.strata_cache().size(); ++g) {
    const auto& st = surv.strata_cache()[g];
    std::vector<double> r(surv.size(), 0.0);
    for (int i : st.by_stop) r[i] = w[i] * std::exp(eta[i]);
    const auto sums =
        cox_detail::stratum_risk_sums(surv, st, r, w.values(), surv.has_start_times());
    HazardCurve curve;
    curve.stratum = surv.strata_ids()[g];
    curve.times = st.fail_times;
    curve.increments.resize(st.fail_times.size());
    for (std::size_t q = 0; q < st.fail_times.size(); ++q)
      curve.increments[q] = sums.dmass[q] / sums.rss[q];
    out.push_back(std::move(curve));
  }
  return out;
}

/// Right-continuous survival step function for one new observation.
struct SurvivalCurve {
  int stratum = 0;
  std::vector<double> times;
  std::vector<double> survival;  // S(t) = exp(-Lambda_0(t) e^{x^T beta})
};

/**
 * Survival curves for the rows of newX at path value s. When the fit has
 * several strata each new row needs a stratum label.
 */
inline std::vector<SurvivalCurve> survival_curve(const PathFit& fit, double s,
                                                 const FeatureMatrix& X,
                                                 const SurvivalResponse& surv,
                                                 const FeatureMatrix& newX,
                                                 const std::vector<int>& new_strata = {},
                                                 const Weights& obs_w = Weights({1.0})) {
  if (newX.cols() != fit.penalty.n_features())
    throw std::invalid_argument("survival_curve: newX column count mismatch");
  if (surv.n_strata() > 1 && new_strata.size() != static_cast<std::size_t>(newX.rows()))
    throw std::invalid_argument(
        "survival_curve: strata of new observations must be given for a stratified fit");
  const std::vector<HazardCurve> base = baseline_hazard(fit, s, X, surv, obs_w);
  const std::vector<double> eta_new =
      predict_path(fit, newX, {s}, PredictType::link).front();
  std::vector<SurvivalCurve> out;
  for (int i = 0; i < newX.rows(); ++i) {
    const int label = new_strata.empty() ? surv.strata_ids()[0] : new_strata[i];
    const HazardCurve* hc = nullptr;
    for (const auto& c : base)
      if (c.stratum == label) hc = &c;
    if (!hc) throw std::invalid_argument("survival_curve: unknown stratum label");
    SurvivalCurve curve;
    curve.stratum = label;
    curve.times = hc->times;
    curve.survival.resize(hc->times.size());
    const double risk = std::exp(eta_new[i]);
    double cum = 0.0;
    for (std::size_t q = 0; q < hc->times.size(); ++q) {
      cum += hc->increments[q];
      curve.survival[q] = std::exp(-cum * risk);
    }
    out.push_back(std::move(curve));
  }
  return out;
}

/// Right-continuous step-function lookup; S(t) = 1 before the first failure.
inline double survival_at(const SurvivalCurve& curve, double t) {
  double s = 1.0;
  for (std::size_t q = 0; q < curve.times.size(); ++q) {
    if (curve.times[q] <= t) s = curve.survival[q];
    else break;
  }
  return s;
}

/**
 * Harrell concordance over comparable pairs within strata: the pair (i,j)
 * with stop_i < stop_j and delta_i = 1 (j still at risk at stop_i for
 * staggered entry) is concordant when eta_i > eta_j; ties in eta count 1/2.
 */
inline double cox_cindex(const SurvivalResponse& surv, const std::vector<double>& eta) {
  if (static_cast<int>(eta.size()) != surv.size())
    throw std::invalid_argument("cox_cindex: eta length mismatch");
  double conc = 0.0, comp = 0.0;
  const int n = surv.size();
  for (int i = 0; i < n; ++i) {
    if (surv.status()[i] != 1) continue;
    for (int j = 0; j < n; ++j) {
      if (j == i || surv.strata()[j] != surv.strata()[i]) continue;
      if (!(surv.stop()[i] < surv.stop()[j])) continue;
      if (!(surv.start()[j] < surv.stop()[i])) continue;  // j not yet entered
      comp += 1.0;
      if (eta[i] > eta[j]) conc += 1.0;
      else if (eta[i] == eta[j]) conc += 0.5;
    }
  }
  if (comp == 0.0) throw std::runtime_error("cox_cindex: no comparable pairs");
  return conc / comp;
}

}  // namespace enetpath
