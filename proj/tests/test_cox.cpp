#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "enetpath/cox.hpp"
#include "oracles.hpp"

using namespace enetpath;
using Catch::Approx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("survival response validation and risk intervals") {
  REQUIRE_THROWS_AS(SurvivalResponse::right_censored({1.0, 2.0}, {0, 2}), std::invalid_argument);
  REQUIRE_THROWS_AS(SurvivalResponse::start_stop({1.0, 1.0}, {2.0, 0.5}, {1, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(SurvivalResponse::right_censored(std::vector<double>{}, std::vector<int>{}),
                    std::invalid_argument);

  SurvivalResponse rc = SurvivalResponse::right_censored({3.0, 5.0}, {1, 1});
  // interval is (start, stop]: at risk at the own stop time, open on the left
  REQUIRE(rc.risk_at(0, 3.0));
  REQUIRE_FALSE(rc.risk_at(0, 3.5));
  SurvivalResponse ss = SurvivalResponse::start_stop({1.0, 0.0}, {3.0, 2.0}, {1, 1});
  REQUIRE_FALSE(ss.risk_at(0, 1.0));  // start == t is not at risk
  REQUIRE(ss.risk_at(0, 2.0));
  REQUIRE(ss.risk_at(0, 3.0));
}

TEST_CASE("partial likelihood hand value and translation invariance") {
  SurvivalResponse surv = SurvivalResponse::right_censored({1.0, 2.0}, {1, 1});
  REQUIRE(neg_log_partial_likelihood(surv, {0.0, 0.0}) ==
          Approx(std::log(2.0)).epsilon(1e-14));

  std::mt19937 rng(300);
  auto inst = oracles::random_survival_instance(rng, 25, 3, true, 2);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> eta(25), eta_shift(25);
  for (int i = 0; i < 25; ++i) {
    eta[i] = N(rng);
    eta_shift[i] = eta[i] + 4.2;
  }
  REQUIRE(neg_log_partial_likelihood(inst.surv, eta) ==
          Approx(neg_log_partial_likelihood(inst.surv, eta_shift)).margin(1e-10));
  auto d1 = cox_derivatives_ss(inst.surv, eta);
  auto d2 = cox_derivatives_ss(inst.surv, eta_shift);
  for (int i = 0; i < 25; ++i) {
    REQUIRE(d1.grad[i] == Approx(d2.grad[i]).margin(1e-10));
    REQUIRE(d1.wdiag[i] == Approx(d2.wdiag[i]).margin(1e-10));
  }
}

TEST_CASE("tied deaths follow the Breslow form") {
  // two deaths at t=1 share the full risk-set denominator
  SurvivalResponse surv = SurvivalResponse::right_censored({1.0, 1.0, 2.0, 3.0}, {1, 1, 1, 0});
  std::vector<double> eta{0.3, -0.2, 0.5, 0.1};
  double expect = 0.0;
  auto lse = [&](std::initializer_list<int> risk) {
    double s = 0.0;
    for (int j : risk) s += std::exp(eta[j]);
    return std::log(s);
  };
  expect += -(eta[0] + eta[1]) + 2.0 * lse({0, 1, 2, 3});
  expect += -eta[2] + lse({2, 3});
  expect *= 2.0 / 4.0;
  REQUIRE(neg_log_partial_likelihood(surv, eta) == Approx(expect).epsilon(1e-12));
  const auto nc = oracles::naive_cox(surv, eta);
  REQUIRE(neg_log_partial_likelihood(surv, eta) == Approx(nc.nlpl).margin(1e-12));
}

TEST_CASE("right-censored derivatives: worked two-point example") {
  SurvivalResponse surv = SurvivalResponse::right_censored({1.0, 2.0}, {1, 1});
  auto d = cox_derivatives_rc(surv, {0.0, 0.0});
  REQUIRE(d.grad[0] == Approx(0.5).epsilon(1e-14));
  REQUIRE(d.grad[1] == Approx(-0.5).epsilon(1e-14));
  REQUIRE(d.wdiag[0] == Approx(0.25).epsilon(1e-14));
  REQUIRE(d.wdiag[1] == Approx(0.25).epsilon(1e-14));
  REQUIRE(d.z[0] == Approx(2.0).epsilon(1e-14));
  REQUIRE(d.z[1] == Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("all-censored data yields zero derivatives") {
  SurvivalResponse surv = SurvivalResponse::right_censored({1.0, 2.0, 3.0}, {0, 0, 0});
  auto d = cox_derivatives_rc(surv, {0.2, -0.1, 0.4});
  for (int i = 0; i < 3; ++i) {
    REQUIRE(d.grad[i] == 0.0);
    REQUIRE(d.wdiag[i] == 0.0);
    REQUIRE(d.z[i] == Approx(d.z[i]));  // finite
  }
}

TEST_CASE("start-stop three-point example matches enumeration") {
  SurvivalResponse surv = SurvivalResponse::start_stop({0.0, 1.5, 0.0}, {1.0, 3.0, 2.0}, {1, 1, 1});
  std::vector<double> eta{0.0, 0.0, 0.0};
  auto d = cox_derivatives_ss(surv, eta);
  auto nc = oracles::naive_cox(surv, eta);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(d.grad[i] == Approx(nc.grad[i]).margin(1e-12));
    REQUIRE(d.wdiag[i] == Approx(nc.wdiag[i]).margin(1e-12));
  }
  // risk sets at t=(1,2,3) are {0,2}, {1,2}, {1} with unit rates, so
  // RSS=(2,2,1); observation 1 enters only after t=1.5:
  //   grad_0 = 1 - 1/2, grad_1 = 1 - (1/2 + 1/1), grad_2 = 1 - (1/2 + 1/2)
  REQUIRE(d.grad[0] == Approx(0.5).margin(1e-14));
  REQUIRE(d.grad[1] == Approx(-0.5).margin(1e-14));
  REQUIRE(d.grad[2] == Approx(0.0).margin(1e-14));
}

TEST_CASE("sweeps match the naive oracle on random instances") {
  std::mt19937 rng(301);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 5 + static_cast<int>(U(rng) * 95);
    const bool staggered = rep % 2 == 1;
    const int nstrata = rep % 3 == 2 ? 3 : 1;
    const bool weighted = rep % 4 == 3;
    auto inst = oracles::random_survival_instance(rng, n, 3, staggered, nstrata, true, weighted);
    std::vector<double> eta(n);
    for (int i = 0; i < n; ++i) eta[i] = 0.8 * N(rng);
    const auto d = staggered ? cox_derivatives_ss(inst.surv, eta, inst.w)
                             : cox_derivatives_rc(inst.surv, eta, inst.w);
    const auto nc = oracles::naive_cox(inst.surv, eta, inst.w);
    for (int i = 0; i < n; ++i) {
      REQUIRE(d.grad[i] == Approx(nc.grad[i]).margin(1e-12 * (1.0 + std::abs(nc.grad[i]))));
      REQUIRE(d.wdiag[i] ==
              Approx(std::max(nc.wdiag[i], 0.0)).margin(1e-12 * (1.0 + nc.wdiag[i])));
      REQUIRE(d.wdiag[i] >= 0.0);
    }
    REQUIRE(neg_log_partial_likelihood(inst.surv, eta, inst.w) ==
            Approx(nc.nlpl).margin(1e-12 * (1.0 + std::abs(nc.nlpl))));
    // score sums to zero within each stratum
    for (int g = 0; g < inst.surv.n_strata(); ++g) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (inst.surv.strata()[i] == inst.surv.strata_ids()[g]) s += d.grad[i];
      REQUIRE(s == Approx(0.0).margin(1e-10));
    }
  }
}

TEST_CASE("zero starts reduce the start-stop sweep to the right-censored sweep exactly") {
  std::mt19937 rng(302);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = oracles::random_survival_instance(rng, 40, 3, false, rep % 2 ? 2 : 1);
    std::vector<double> zeros(40, 0.0);
    SurvivalResponse ss = SurvivalResponse::start_stop(zeros, inst.surv.stop(),
                                                       inst.surv.status(), inst.surv.strata());
    std::vector<double> eta(40);
    for (int i = 0; i < 40; ++i) eta[i] = N(rng);
    auto a = cox_derivatives_rc(inst.surv, eta, inst.w);
    auto b = cox_derivatives_ss(ss, eta, inst.w);
    for (int i = 0; i < 40; ++i) {
      REQUIRE(a.grad[i] == b.grad[i]);
      REQUIRE(a.wdiag[i] == b.wdiag[i]);
      REQUIRE(a.z[i] == b.z[i]);
    }
  }
  // the rc entry point refuses genuinely staggered data
  SurvivalResponse staggered = SurvivalResponse::start_stop({0.5, 0.0}, {2.0, 1.0}, {1, 1});
  REQUIRE_THROWS_AS(cox_derivatives_rc(staggered, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("gradient matches finite differences of the log partial likelihood") {
  std::mt19937 rng(303);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 20;
    auto inst = oracles::random_survival_instance(rng, n, 2, rep % 2 == 1, 1);
    std::vector<double> eta(n);
    for (int i = 0; i < n; ++i) eta[i] = 0.6 * N(rng);
    auto d = cox_derivatives(inst.surv, eta);
    const double h = 1e-6;
    for (int k = 0; k < n; ++k) {
      auto ep = eta, em = eta;
      ep[k] += h;
      em[k] -= h;
      // ell = -(n/2) * nlpl
      const double fd = -(n / 2.0) *
                        (neg_log_partial_likelihood(inst.surv, ep) -
                         neg_log_partial_likelihood(inst.surv, em)) /
                        (2.0 * h);
      REQUIRE(d.grad[k] == Approx(fd).margin(1e-6 * (1.0 + std::abs(fd))));
    }
  }
}

TEST_CASE("cox path: lambda_max nulls the coefficients and lambda=0 matches Newton") {
  std::mt19937 rng(304);
  auto inst = oracles::random_survival_instance(rng, 20, 3, false, 1, false);
  auto X = oracles::to_dense_matrix(inst.X);
  auto pen = PenaltySpec::make(3, 1.0, {}, {}, {}, false, true);
  PathOptions opts;
  opts.outer_tol = 1e-11;
  opts.nlambda = 5;
  opts.early_stop = false;
  auto fit = fit_cox_path(X, inst.surv, Weights::uniform(20), pen, opts);
  REQUIRE(fit.is_cox);
  REQUIRE(fit.coefficients[0].nnz() == 0);
  REQUIRE(fit.intercepts.empty());

  PathOptions zero;
  zero.lambda = {fit.lambda_max, 0.2 * fit.lambda_max, 0.0};
  zero.outer_tol = 1e-12;
  auto fit0 = fit_cox_path(X, inst.surv, Weights::uniform(20), pen, zero);
  auto beta = fit0.coefficients.back().densify(3);
  VectorXd oracle = oracles::cox_newton(inst.surv, inst.X);
  for (int j = 0; j < 3; ++j) REQUIRE(beta[j] == Approx(oracle(j)).margin(1e-5));
}

TEST_CASE("single stratum equals unstratified; copies decouple") {
  std::mt19937 rng(305);
  auto inst = oracles::random_survival_instance(rng, 30, 3, true, 1);
  auto X = oracles::to_dense_matrix(inst.X);
  auto pen = PenaltySpec::make(3);
  PathOptions opts;
  opts.nlambda = 12;

  SurvivalResponse tagged = SurvivalResponse::start_stop(
      inst.surv.start(), inst.surv.stop(), inst.surv.status(), std::vector<int>(30, 7));
  auto f1 = fit_cox_path(X, inst.surv, Weights::uniform(30), pen, opts);
  auto f2 = fit_cox_path(X, tagged, Weights::uniform(30), pen, opts);
  REQUIRE(f1.n_lambda() == f2.n_lambda());
  for (int k = 0; k < f1.n_lambda(); ++k) {
    auto a = f1.coefficients[k].densify(3);
    auto b = f2.coefficients[k].densify(3);
    for (int j = 0; j < 3; ++j) REQUIRE(a[j] == b[j]);
  }

  // stacking two copies of the data as two strata reproduces the one-copy fit
  std::vector<double> start2, stop2;
  std::vector<int> status2, strata2;
  MatrixXd X2(60, 3);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 30; ++i) {
      start2.push_back(inst.surv.start()[i]);
      stop2.push_back(inst.surv.stop()[i]);
      status2.push_back(inst.surv.status()[i]);
      strata2.push_back(c);
      X2.row(30 * c + i) = inst.X.row(i);
    }
  }
  SurvivalResponse doubled = SurvivalResponse::start_stop(start2, stop2, status2, strata2);
  auto f3 = fit_cox_path(oracles::to_dense_matrix(X2), doubled, Weights::uniform(60), pen, opts);
  REQUIRE(f3.n_lambda() == f1.n_lambda());
  for (int k = 0; k < f1.n_lambda(); ++k) {
    auto a = f1.coefficients[k].densify(3);
    auto b = f3.coefficients[k].densify(3);
    for (int j = 0; j < 3; ++j) REQUIRE(a[j] == Approx(b[j]).margin(1e-8));
  }
}

TEST_CASE("no-failure data is rejected") {
  SurvivalResponse surv = SurvivalResponse::right_censored({1.0, 2.0}, {0, 0});
  auto X = FeatureMatrix::dense(2, 1, {0.5, -0.5});
  REQUIRE_THROWS_AS(fit_cox_path(X, surv, Weights::uniform(2), PenaltySpec::make(1)),
                    std::invalid_argument);
}

TEST_CASE("baseline hazard reduces to Nelson-Aalen at beta = 0") {
  const int n = 6;
  std::vector<double> stop{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  SurvivalResponse surv = SurvivalResponse::right_censored(stop, std::vector<int>(n, 1));
  auto X = FeatureMatrix::dense(n, 1, std::vector<double>(n, 0.0));
  // an all-zero column cannot standardize; fit unstandardized at one lambda
  auto pen = PenaltySpec::make(1, 1.0, {}, {}, {}, false, false);
  PathOptions opts;
  opts.lambda = {1.0};
  auto fit = fit_cox_path(X, surv, Weights::uniform(n), pen, opts);
  auto base = baseline_hazard(fit, 1.0, X, surv);
  REQUIRE(base.size() == 1);
  REQUIRE(base[0].times.size() == 6);
  for (int q = 0; q < 6; ++q)
    REQUIRE(base[0].increments[q] == Approx(1.0 / (n - q)).epsilon(1e-12));

  auto curves = survival_curve(fit, 1.0, X, surv, X);
  REQUIRE(curves.size() == static_cast<std::size_t>(n));
  REQUIRE(survival_at(curves[0], 0.5) == 1.0);  // before the first failure
  REQUIRE(curves[0].survival[0] == Approx(std::exp(-1.0 / 6.0)).epsilon(1e-12));
}

TEST_CASE("breslow baseline on a small weighted example matches enumeration") {
  std::mt19937 rng(306);
  auto inst = oracles::random_survival_instance(rng, 5, 2, false, 1, true, true);
  auto X = oracles::to_dense_matrix(inst.X);
  auto pen = PenaltySpec::make(2);
  PathOptions opts;
  opts.nlambda = 4;
  opts.early_stop = false;
  auto fit = fit_cox_path(X, inst.surv, Weights{inst.w}, pen, opts);
  const double s = fit.lambda.back();
  auto eta = predict_path(fit, X, {s}, PredictType::link).front();
  auto base = baseline_hazard(fit, s, X, inst.surv, Weights{inst.w});

  // direct enumeration with weights rescaled to sum n, as in the fit
  double wsum = 0.0;
  for (double v : inst.w) wsum += v;
  std::vector<double> w(inst.w);
  for (double& v : w) v *= 5.0 / wsum;
  for (const auto& curve : base) {
    for (std::size_t q = 0; q < curve.times.size(); ++q) {
      double num = 0.0, den = 0.0;
      for (int j = 0; j < 5; ++j) {
        if (inst.surv.status()[j] == 1 && inst.surv.stop()[j] == curve.times[q])
          num += w[j];
        if (inst.surv.start()[j] < curve.times[q] && curve.times[q] <= inst.surv.stop()[j])
          den += w[j] * std::exp(eta[j]);
      }
      REQUIRE(curve.increments[q] == Approx(num / den).margin(1e-12));
    }
  }
}

TEST_CASE("survival curves require strata labels for stratified fits") {
  std::mt19937 rng(307);
  auto inst = oracles::random_survival_instance(rng, 30, 2, false, 2);
  auto X = oracles::to_dense_matrix(inst.X);
  auto pen = PenaltySpec::make(2);
  PathOptions opts;
  opts.nlambda = 4;
  opts.early_stop = false;
  auto fit = fit_cox_path(X, inst.surv, Weights::uniform(30), pen, opts);
  const double s = fit.lambda.back();
  REQUIRE_THROWS_AS(survival_curve(fit, s, X, inst.surv, X), std::invalid_argument);
  auto curves = survival_curve(fit, s, X, inst.surv, X, inst.surv.strata());
  REQUIRE(curves.size() == 30);
  for (const auto& c : curves)
    for (std::size_t q = 1; q < c.survival.size(); ++q)
      REQUIRE(c.survival[q] <= c.survival[q - 1] + 1e-15);
}

TEST_CASE("survival curve rejects mismatched designs") {
  std::mt19937 rng(308);
  auto inst = oracles::random_survival_instance(rng, 20, 2, false, 1);
  auto X = oracles::to_dense_matrix(inst.X);
  PathOptions opts;
  opts.nlambda = 4;
  opts.early_stop = false;
  auto fit = fit_cox_path(X, inst.surv, Weights::uniform(20), PenaltySpec::make(2), opts);
  auto narrow = FeatureMatrix::dense(2, 1, {0.1, 0.2});
  REQUIRE_THROWS_AS(survival_curve(fit, fit.lambda.back(), X, inst.surv, narrow),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(baseline_hazard(fit, fit.lambda.back(), narrow, inst.surv),
                    std::invalid_argument);
}

TEST_CASE("concordance index sanity") {
  // perfect risk ordering: higher eta fails earlier
  SurvivalResponse surv = SurvivalResponse::right_censored({1.0, 2.0, 3.0, 4.0}, {1, 1, 1, 0});
  REQUIRE(cox_cindex(surv, {3.0, 2.0, 1.0, 0.0}) == 1.0);
  REQUIRE(cox_cindex(surv, {0.0, 1.0, 2.0, 3.0}) == 0.0);
  REQUIRE(cox_cindex(surv, {1.0, 1.0, 1.0, 1.0}) == 0.5);
}
