#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "enetpath/matrix.hpp"
#include "oracles.hpp"

using namespace enetpath;
using Catch::Approx;

TEST_CASE("construction validates CSC invariants") {
  REQUIRE_NOTHROW(FeatureMatrix::sparse(3, 2, {0, 1, 2}, {0, 2}, {1.0, 3.0}));
  // final pointer must equal nnz
  REQUIRE_THROWS_AS(FeatureMatrix::sparse(3, 2, {0, 1, 3}, {0, 2}, {1.0, 3.0}),
                    std::invalid_argument);
  // nondecreasing pointers
  REQUIRE_THROWS_AS(FeatureMatrix::sparse(3, 2, {0, 2, 1}, {0, 1}, {1.0, 3.0}),
                    std::invalid_argument);
  // strictly increasing row indices within a column
  REQUIRE_THROWS_AS(FeatureMatrix::sparse(3, 1, {0, 2}, {1, 1}, {1.0, 3.0}),
                    std::invalid_argument);
  // finite values only
  REQUIRE_THROWS_AS(FeatureMatrix::dense(1, 1, {std::numeric_limits<double>::quiet_NaN()}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(FeatureMatrix::sparse(2, 1, {0, 1}, {0},
                                          {std::numeric_limits<double>::infinity()}),
                    std::invalid_argument);
}

TEST_CASE("weights validate") {
  REQUIRE_THROWS_AS(Weights(std::vector<double>{}), std::invalid_argument);
  REQUIRE_THROWS_AS(Weights({1.0, -0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(Weights({0.0, 0.0}), std::invalid_argument);
  REQUIRE_NOTHROW(Weights({0.0, 2.0}));
}

TEST_CASE("column_stats on tiny hand cases") {
  const Weights w = Weights::uniform(3);

  // constant column has mean 1, scale exactly 0
  auto X1 = FeatureMatrix::dense(3, 1, {1.0, 1.0, 1.0});
  auto st1 = column_stats(X1, w);
  REQUIRE(st1.means[0] == Approx(1.0));
  REQUIRE(st1.scales[0] == 0.0);
  REQUIRE(st1.zero_variance[0] == 1);

  // symmetric column: mean 0, population scale 1
  auto X2 = FeatureMatrix::dense(2, 1, {-1.0, 1.0});
  auto st2 = column_stats(X2, Weights::uniform(2));
  REQUIRE(st2.means[0] == Approx(0.0).margin(1e-15));
  REQUIRE(st2.scales[0] == Approx(1.0));
  REQUIRE(st2.zero_variance[0] == 0);

  // sparse (0,0,3): mean 1, scale sqrt(2); matches the dense-path oracle
  auto X3 = FeatureMatrix::sparse(3, 1, {0, 1}, {2}, {3.0});
  auto st3 = column_stats(X3, w);
  REQUIRE(st3.means[0] == Approx(1.0));
  REQUIRE(st3.scales[0] == Approx(std::sqrt(2.0)));
  auto oracle = oracles::dense_column_stats(oracles::densify(X3), w.values());
  REQUIRE(st3.means[0] == Approx(oracle.means[0]).epsilon(1e-12));
  REQUIRE(st3.scales[0] == Approx(oracle.scales[0]).epsilon(1e-12));
}

TEST_CASE("column_stats rejects empty input") {
  REQUIRE_THROWS_AS(column_stats(FeatureMatrix::dense(0, 0, {}), Weights({1.0})),
                    std::invalid_argument);
}

TEST_CASE("weighted_dot hand cases") {
  auto X = FeatureMatrix::dense(2, 1, {1.0, 2.0});
  const Weights w = Weights::uniform(2);
  REQUIRE(weighted_dot(X, 0, {1.0, 1.0}, w, false) == Approx(3.0));
  // centered with mean 1.5: (1-1.5)*1 + (2-1.5)*(-1) = -1
  REQUIRE(weighted_dot(X, 0, {1.0, -1.0}, w, true) == Approx(-1.0));
  REQUIRE_THROWS_AS(weighted_dot(X, 1, {1.0, 1.0}, w, false), std::out_of_range);
}

TEST_CASE("predict_linear hand cases") {
  auto X = FeatureMatrix::dense(2, 2, {1.0, 0.0, 0.0, 1.0});
  auto eta0 = predict_linear(X, {0.0, 0.0}, 2.5);
  REQUIRE(eta0[0] == 2.5);
  REQUIRE(eta0[1] == 2.5);
  auto eta1 = predict_linear(X, {3.0, -4.0}, 0.0);
  REQUIRE(eta1[0] == Approx(3.0));
  REQUIRE(eta1[1] == Approx(-4.0));
  REQUIRE_THROWS_AS(predict_linear(X, {1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("sparse operations match the dense oracle on random instances") {
  std::mt19937 rng(1234);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(U(rng) * 20);
    const int p = 1 + static_cast<int>(U(rng) * 8);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j)
        if (U(rng) > 0.6) M(i, j) = N(rng);
    auto Xs = oracles::to_sparse_matrix(M);
    auto Xd = oracles::to_dense_matrix(M);
    std::vector<double> wv(n), v(n), beta(p);
    for (int i = 0; i < n; ++i) {
      wv[i] = 0.25 + U(rng);
      v[i] = N(rng);
    }
    for (int j = 0; j < p; ++j) beta[j] = N(rng);
    const Weights w{wv};

    auto ss = column_stats(Xs, w);
    auto sd = column_stats(Xd, w);
    auto oracle = oracles::dense_column_stats(M, wv);
    for (int j = 0; j < p; ++j) {
      REQUIRE(ss.means[j] == Approx(oracle.means[j]).margin(1e-12));
      REQUIRE(ss.scales[j] == Approx(oracle.scales[j]).margin(1e-12));
      REQUIRE(ss.means[j] == sd.means[j]);
      REQUIRE(ss.scales[j] == sd.scales[j]);
    }
    for (int j = 0; j < p; ++j) {
      for (bool centered : {false, true}) {
        const double a = weighted_dot(Xs, j, v, w, centered);
        const double b = weighted_dot(Xd, j, v, w, centered);
        REQUIRE(a == b);  // identical operation order by construction
        // dense oracle
        double mean = 0.0, wsum = 0.0;
        for (int i = 0; i < n; ++i) wsum += wv[i];
        for (int i = 0; i < n; ++i) mean += wv[i] / wsum * M(i, j);
        double expect = 0.0;
        for (int i = 0; i < n; ++i)
          expect += wv[i] * (M(i, j) - (centered ? mean : 0.0)) * v[i];
        REQUIRE(a == Approx(expect).margin(1e-10 * (1.0 + std::abs(expect))));
      }
    }
    auto es = predict_linear(Xs, beta, 0.7);
    auto ed = predict_linear(Xd, beta, 0.7);
    Eigen::VectorXd be = Eigen::Map<Eigen::VectorXd>(beta.data(), p);
    Eigen::VectorXd expect = M * be + Eigen::VectorXd::Constant(n, 0.7);
    for (int i = 0; i < n; ++i) {
      REQUIRE(es[i] == ed[i]);
      REQUIRE(es[i] == Approx(expect(i)).margin(1e-12 * (1.0 + std::abs(expect(i)))));
    }
  }
}

TEST_CASE("weighted_dot is bilinear in v and w") {
  std::mt19937 rng(77);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 12;
  Eigen::MatrixXd M(n, 1);
  std::vector<double> v1(n), v2(n), wv(n);
  for (int i = 0; i < n; ++i) {
    M(i, 0) = N(rng);
    v1[i] = N(rng);
    v2[i] = N(rng);
    wv[i] = 0.5 + std::abs(N(rng));
  }
  auto X = oracles::to_dense_matrix(M);
  const Weights w{wv};
  const double a = 1.7, b = -0.3;
  std::vector<double> vc(n);
  for (int i = 0; i < n; ++i) vc[i] = a * v1[i] + b * v2[i];
  const double lhs = weighted_dot(X, 0, vc, w, false);
  const double rhs =
      a * weighted_dot(X, 0, v1, w, false) + b * weighted_dot(X, 0, v2, w, false);
  REQUIRE(lhs == Approx(rhs).margin(1e-10));

  std::vector<double> w2(n);
  for (int i = 0; i < n; ++i) w2[i] = 2.5 * wv[i];
  REQUIRE(weighted_dot(X, 0, v1, Weights{w2}, false) ==
          Approx(2.5 * weighted_dot(X, 0, v1, w, false)).margin(1e-10));
}

TEST_CASE("select_columns preserves content") {
  std::mt19937 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j)
      if ((i + j) % 2 == 0) M(i, j) = N(rng);
  for (auto maker : {oracles::to_sparse_matrix, oracles::to_dense_matrix}) {
    auto X = maker(M);
    auto sub = X.select_columns({3, 1});
    REQUIRE(sub.cols() == 2);
    for (int i = 0; i < 6; ++i) {
      REQUIRE(sub.at(i, 0) == M(i, 3));
      REQUIRE(sub.at(i, 1) == M(i, 1));
    }
  }
}
