#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "enetpath/matrix.hpp"

namespace enetpath {

enum class Link { identity, log_link, logit, probit, inverse, inverse_squared };
enum class VarianceKind { constant, binomial, identity_mu, squared, cubed, negbin, power };
enum class DevianceKind { gaussian, binomial, poisson, gamma, inv_gaussian, negbin, tweedie };
enum class ResponseDomain { real, unit_interval, nonnegative, positive };

namespace detail {

constexpr double kBinomialMuEps = 1e-5;   // binomial mu clamp
constexpr double kPositiveMuEps = 1e-10;  // lower clamp for positive-mean families
constexpr double kMuEtaFloor = 1e-10;
constexpr double kProbitEtaMax = 8.1258906647499641;  // -qnorm(double eps)

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse standard-normal CDF: Acklam's rational approximation refined by
/// one Halley step, good to ~1e-15 over (0,1).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_quantile: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the high-accuracy erfc-based CDF.
  double e = norm_cdf(x) - p;
  double u = e / norm_pdf(x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

}  // namespace detail

/**
 * One-parameter GLM family in quasi-likelihood form: a link pair, its
 * derivative, a variance function, a unit deviance, and initialization.
 * Built-ins cover the usual families; custom families supply the same
 * ingredients as callables.
 */
class FamilySpec {
 public:
  struct Custom {
    std::function<double(double)> link;        // mu -> eta
    std::function<double(double)> link_inv;    // eta -> mu
    std::function<double(double)> mu_eta;      // eta -> dmu/deta
    std::function<double(double)> variance;    // mu -> V(mu)
    std::function<double(double, double)> unit_deviance;  // (y, mu) -> d
    std::function<double(double)> clamp_mu;    // mu -> interior mu
    std::function<double(double, double)> init_mu;  // (y, w) -> mu0
    ResponseDomain domain = ResponseDomain::real;
  };

  static FamilySpec gaussian() {
    return FamilySpec("gaussian", Link::identity, VarianceKind::constant,
                      DevianceKind::gaussian, ResponseDomain::real);
  }
  static FamilySpec binomial(Link link = Link::logit) {
    if (link != Link::logit && link != Link::probit)
      throw std::invalid_argument("binomial: unsupported link");
    return FamilySpec(link == Link::probit ? "binomial:probit" : "binomial", link,
                      VarianceKind::binomial, DevianceKind::binomial,
                      ResponseDomain::unit_interval);
  }
  static FamilySpec quasibinomial() {
    FamilySpec f = binomial();
    f.name_ = "quasibinomial";
    return f;
  }
  static FamilySpec poisson() {
    return FamilySpec("poisson", Link::log_link, VarianceKind::identity_mu,
                      DevianceKind::poisson, ResponseDomain::nonnegative);
  }
  static FamilySpec quasipoisson() {
    FamilySpec f = poisson();
    f.name_ = "quasipoisson";
    return f;
  }
  static FamilySpec negative_binomial(double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("negative_binomial: theta must be > 0");
    FamilySpec f("negative-binomial", Link::log_link, VarianceKind::negbin,
                 DevianceKind::negbin, ResponseDomain::nonnegative);
    f.theta_ = theta;
    return f;
  }
  static FamilySpec gamma_family(Link link = Link::log_link) {
    if (link != Link::log_link && link != Link::inverse)
      throw std::invalid_argument("gamma: unsupported link");
    return FamilySpec(link == Link::inverse ? "gamma:inverse" : "gamma", link,
                      VarianceKind::squared, DevianceKind::gamma, ResponseDomain::positive);
  }
  static FamilySpec inverse_gaussian(Link link = Link::log_link) {
    if (link != Link::log_link && link != Link::inverse_squared)
      throw std::invalid_argument("inverse-gaussian: unsupported link");
    return FamilySpec(link == Link::inverse_squared ? "inverse-gaussian:inverse-squared"
                                                    : "inverse-gaussian",
                      link, VarianceKind::cubed, DevianceKind::inv_gaussian,
                      ResponseDomain::positive);
  }
  static FamilySpec tweedie(double q) {
    if (!(q == 0.0 || (q >= 1.0 && q <= 3.0)))
      throw std::invalid_argument("tweedie: variance power must be 0 or in [1,3]");
    ResponseDomain dom = q == 0.0 ? ResponseDomain::real
                         : q < 2.0 ? ResponseDomain::nonnegative
                                   : ResponseDomain::positive;
    FamilySpec f("tweedie", Link::log_link, VarianceKind::power, DevianceKind::tweedie, dom);
    f.power_ = q;
    return f;
  }

  /// Custom family from the same six ingredients as the built-ins.
  static FamilySpec custom(const std::string& name, Custom fns) {
    FamilySpec f(name, Link::identity, VarianceKind::constant, DevianceKind::gaussian,
                 fns.domain);
    f.custom_ = std::make_shared<Custom>(std::move(fns));
    return f;
  }

  /**
   * Parse a CLI family string: gaussian, binomial, binomial:probit,
   * quasibinomial, poisson, quasipoisson, negative-binomial:theta=<v>,
   * gamma, inverse-gaussian, tweedie:q=<v>.
   */
  static FamilySpec parse(const std::string& s) {
    auto param_value = [&](const std::string& key) {
      auto pos = s.find(':');
      std::string rest = s.substr(pos + 1);
      if (rest.rfind(key + "=", 0) != 0)
        throw std::invalid_argument("family: expected " + key + "=<value> in '" + s + "'");
      return std::stod(rest.substr(key.size() + 1));
    };
    if (s == "gaussian") return gaussian();
    if (s == "binomial") return binomial();
    if (s == "binomial:probit") return binomial(Link::probit);
    if (s == "quasibinomial") return quasibinomial();
    if (s == "poisson") return poisson();
    if (s == "quasipoisson") return quasipoisson();
    if (s.rfind("negative-binomial:", 0) == 0) return negative_binomial(param_value("theta"));
    if (s == "gamma") return gamma_family();
    if (s == "gamma:inverse") return gamma_family(Link::inverse);
    if (s == "inverse-gaussian") return inverse_gaussian();
    if (s == "inverse-gaussian:inverse-squared")
      return inverse_gaussian(Link::inverse_squared);
    if (s.rfind("tweedie:", 0) == 0) return tweedie(param_value("q"));
    throw std::invalid_argument("family: unknown family '" + s + "'");
  }

  const std::string& name() const { return name_; }
  Link link() const { return link_; }
  double theta() const { return theta_; }
  double variance_power() const { return power_; }
  ResponseDomain domain() const { return custom_ ? custom_->domain : domain_; }
  bool is_binomial_like() const { return deviance_ == DevianceKind::binomial && !custom_; }

  double link_eval(double mu) const {
    if (custom_) return custom_->link(mu);
    switch (link_) {
      case Link::identity: return mu;
      case Link::log_link: return std::log(mu);
      case Link::logit: return std::log(mu / (1.0 - mu));
      case Link::probit: return detail::norm_quantile(mu);
      case Link::inverse: return 1.0 / mu;
      case Link::inverse_squared: return 1.0 / (mu * mu);
    }
    throw std::logic_error("unreachable");
  }

  double link_inverse(double eta) const {
    if (custom_) return custom_->link_inv(eta);
    switch (link_) {
      case Link::identity: return eta;
      case Link::log_link: return std::exp(eta);
      case Link::logit:
        return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                          : std::exp(eta) / (1.0 + std::exp(eta));
      case Link::probit:
        return detail::norm_cdf(std::clamp(eta, -detail::kProbitEtaMax, detail::kProbitEtaMax));
      case Link::inverse: return 1.0 / guard_eta(eta);
      case Link::inverse_squared: return 1.0 / std::sqrt(guard_eta(eta));
    }
    throw std::logic_error("unreachable");
  }

  double mu_eta(double eta) const {
    if (custom_) return custom_->mu_eta(eta);
    switch (link_) {
      case Link::identity: return 1.0;
      case Link::log_link: return std::exp(eta);
      case Link::logit: {
        const double mu = link_inverse(eta);
        return mu * (1.0 - mu);
      }
      case Link::probit:
        return std::max(detail::norm_pdf(eta), detail::kMuEtaFloor);
      case Link::inverse: {
        const double e = guard_eta(eta);
        return -1.0 / (e * e);
      }
      case Link::inverse_squared: {
        const double e = guard_eta(eta);
        return -0.5 * std::pow(e, -1.5);
      }
    }
    throw std::logic_error("unreachable");
  }

  double variance(double mu) const {
    if (custom_) return custom_->variance(mu);
    switch (variance_) {
      case VarianceKind::constant: return 1.0;
      case VarianceKind::binomial: return mu * (1.0 - mu);
      case VarianceKind::identity_mu: return mu;
      case VarianceKind::squared: return mu * mu;
      case VarianceKind::cubed: return mu * mu * mu;
      case VarianceKind::negbin: return mu + mu * mu / theta_;
      case VarianceKind::power: return std::pow(mu, power_);
    }
    throw std::logic_error("unreachable");
  }

  /// Clamp a mean to the interior of the family's valid range before
  /// variance/deviance evaluation.
  double clamp_mu(double mu) const {
    if (custom_) return custom_->clamp_mu ? custom_->clamp_mu(mu) : mu;
    switch (domain_) {
      case ResponseDomain::real: return mu;
      case ResponseDomain::unit_interval:
        return std::clamp(mu, detail::kBinomialMuEps, 1.0 - detail::kBinomialMuEps);
      case ResponseDomain::nonnegative:
      case ResponseDomain::positive:
        return std::max(mu, detail::kPositiveMuEps);
    }
    throw std::logic_error("unreachable");
  }

  double unit_deviance(double y, double mu) const {
    if (custom_) return custom_->unit_deviance(y, mu);
    using detail::xlogy;
    switch (deviance_) {
      case DevianceKind::gaussian: return (y - mu) * (y - mu);
      case DevianceKind::binomial:
        return 2.0 * (xlogy(y, y / mu) + xlogy(1.0 - y, (1.0 - y) / (1.0 - mu)));
      case DevianceKind::poisson: return 2.0 * (xlogy(y, y / mu) - (y - mu));
      case DevianceKind::gamma: return 2.0 * (-std::log(y / mu) + (y - mu) / mu);
      case DevianceKind::inv_gaussian: return (y - mu) * (y - mu) / (mu * mu * y);
      case DevianceKind::negbin:
        return 2.0 * (xlogy(y, y / mu) - (y + theta_) * std::log((y + theta_) / (mu + theta_)));
      case DevianceKind::tweedie: {
        const double q = power_;
        if (q == 0.0) return (y - mu) * (y - mu);
        if (q == 1.0) return 2.0 * (xlogy(y, y / mu) - (y - mu));
        if (q == 2.0) return 2.0 * (-std::log(y / mu) + (y - mu) / mu);
        const double a = y <= 0.0 ? 0.0 : std::pow(y, 2.0 - q) / ((1.0 - q) * (2.0 - q));
        const double b = y * std::pow(mu, 1.0 - q) / (1.0 - q);
        const double c = std::pow(mu, 2.0 - q) / (2.0 - q);
        return 2.0 * (a - b + c);
      }
    }
    throw std::logic_error("unreachable");
  }

  /// Strictly interior starting mean for IRLS.
  double initial_mu(double y, double w) const {
    if (custom_ && custom_->init_mu) return custom_->init_mu(y, w);
    switch (domain()) {
      case ResponseDomain::real: return y;
      case ResponseDomain::unit_interval: return (w * y + 0.5) / (w + 1.0);
      case ResponseDomain::nonnegative:
      case ResponseDomain::positive: return y + 0.1;
    }
    throw std::logic_error("unreachable");
  }

  void validate_response(const std::vector<double>& y) const {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double v = y[i];
      bool ok = std::isfinite(v);
      if (ok) {
        switch (domain()) {
          case ResponseDomain::real: break;
          case ResponseDomain::unit_interval: ok = v >= 0.0 && v <= 1.0; break;
          case ResponseDomain::nonnegative: ok = v >= 0.0; break;
          case ResponseDomain::positive: ok = v > 0.0; break;
        }
      }
      if (!ok)
        throw std::invalid_argument("response: value at row " + std::to_string(i) +
                                    " invalid for family " + name_);
    }
  }

 private:
  FamilySpec(std::string name, Link link, VarianceKind var, DevianceKind dev,
             ResponseDomain dom)
      : name_(std::move(name)), link_(link), variance_(var), deviance_(dev), domain_(dom) {}

  double guard_eta(double eta) const {
    // inverse-type links feeding positive-mean families need eta > 0
    if (domain_ == ResponseDomain::positive || domain_ == ResponseDomain::nonnegative)
      return std::max(eta, detail::kPositiveMuEps);
    if (std::abs(eta) < detail::kPositiveMuEps)
      return eta < 0.0 ? -detail::kPositiveMuEps : detail::kPositiveMuEps;
    return eta;
  }

  std::string name_;
  Link link_;
  VarianceKind variance_;
  DevianceKind deviance_;
  ResponseDomain domain_;
  double theta_ = 1.0;
  double power_ = 0.0;
  std::shared_ptr<Custom> custom_;
};

/// Working response z and weight w of one IRLS step.
struct IrlsWorking {
  std::vector<double> z;
  std::vector<double> w;
};

inline IrlsWorking irls_working(const FamilySpec& f, const std::vector<double>& y,
                                const std::vector<double>& eta, const Weights& obs_w) {
  const std::size_t n = y.size();
  if (eta.size() != n || obs_w.size() != n)
    throw std::invalid_argument("irls_working: length mismatch");
  IrlsWorking out;
  out.z.resize(n);
  out.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = f.clamp_mu(f.link_inverse(eta[i]));
    const double me = f.mu_eta(eta[i]);
    const double v = f.variance(mu);
    const double wi = obs_w[i] * me * me / v;
    const double zi = eta[i] + (y[i] - mu) / me;
    if (!std::isfinite(wi) || wi < 0.0)
      throw std::runtime_error("irls_working: nonfinite or negative weight (family/data mismatch)");
    out.w[i] = wi;
    out.z[i] = std::isfinite(zi) ? zi : eta[i];
  }
  return out;
}

/// Total weighted deviance sum_i w_i d(y_i, mu_i).
inline double deviance(const FamilySpec& f, const std::vector<double>& y,
                       const std::vector<double>& mu, const Weights& obs_w) {
  const std::size_t n = y.size();
  if (mu.size() != n || obs_w.size() != n)
    throw std::invalid_argument("deviance: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += obs_w[i] * f.unit_deviance(y[i], f.clamp_mu(mu[i]));
  return total;
}

/// Interior starting means and the null-model intercept g(weighted mean of mu0).
struct FamilyInit {
  std::vector<double> mu0;
  double intercept0;
};

inline FamilyInit initialize(const FamilySpec& f, const std::vector<double>& y,
                             const Weights& obs_w) {
  if (y.size() != obs_w.size()) throw std::invalid_argument("initialize: length mismatch");
  FamilyInit init;
  init.mu0.resize(y.size());
  const double wsum = obs_w.sum();
  double mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    init.mu0[i] = f.clamp_mu(f.initial_mu(y[i], obs_w[i]));
    mean += (obs_w[i] / wsum) * init.mu0[i];
  }
  init.intercept0 = f.link_eval(f.clamp_mu(mean));
  return init;
}

}  // namespace enetpath
