#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace enetpath {

/**
 * Elastic-net penalty configuration: mixing parameter alpha, per-coefficient
 * penalty factors (rescaled to mean 1 unless disabled), box bounds with
 * L_j <= 0 <= U_j so zero stays feasible, and the standardize/intercept flags.
 */
struct PenaltySpec {
  double alpha = 1.0;
  std::vector<double> factors;
  std::vector<double> lower;
  std::vector<double> upper;
  bool standardize = true;
  bool intercept = true;

  static PenaltySpec make(int p, double alpha = 1.0, std::vector<double> factors = {},
                          std::vector<double> lower = {}, std::vector<double> upper = {},
                          bool standardize = true, bool intercept = true,
                          bool rescale_factors = true) {
    if (p <= 0) throw std::invalid_argument("penalty: p must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("penalty: alpha outside [0,1]");
    PenaltySpec s;
    s.alpha = alpha;
    s.standardize = standardize;
    s.intercept = intercept;
    s.factors = factors.empty() ? std::vector<double>(p, 1.0) : std::move(factors);
    s.lower = lower.empty()
                  ? std::vector<double>(p, -std::numeric_limits<double>::infinity())
                  : std::move(lower);
    s.upper = upper.empty() ? std::vector<double>(p, std::numeric_limits<double>::infinity())
                            : std::move(upper);
    if (s.factors.size() != static_cast<std::size_t>(p) ||
        s.lower.size() != static_cast<std::size_t>(p) ||
        s.upper.size() != static_cast<std::size_t>(p))
      throw std::invalid_argument("penalty: per-feature arrays must have length p");
    double fsum = 0.0;
    for (double g : s.factors) {
      if (std::isnan(g) || g < 0.0)
        throw std::invalid_argument("penalty: factors must be nonnegative");
      fsum += g;
    }
    if (fsum == 0.0) throw std::invalid_argument("penalty: factors are all zero");
    if (rescale_factors) {
      const double f = static_cast<double>(p) / fsum;
      for (double& g : s.factors) g *= f;
    }
    for (int j = 0; j < p; ++j) {
      if (std::isnan(s.lower[j]) || std::isnan(s.upper[j]) || s.lower[j] > 0.0 ||
          s.upper[j] < 0.0)
        throw std::invalid_argument("penalty: bounds must satisfy L_j <= 0 <= U_j (feature " +
                                    std::to_string(j) + ")");
    }
    return s;
  }

  int n_features() const { return static_cast<int>(factors.size()); }

  /// lambda * sum_j gamma_j ((1-alpha)/2 beta_j^2 + alpha |beta_j|)
  double value(double lambda, const std::vector<double>& beta) const {
    double s = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j)
      s += factors[j] * (0.5 * (1.0 - alpha) * beta[j] * beta[j] + alpha * std::abs(beta[j]));
    return lambda * s;
  }
};

}  // namespace enetpath
