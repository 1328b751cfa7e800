#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crossalpha/combine.hpp"
#include "crossalpha/errors.hpp"
#include "crossalpha/evaluate.hpp"
#include "crossalpha/synth.hpp"
#include "oracles.hpp"

using namespace crossalpha;

namespace {

FactorPanel factor_from(const Matrix& values, const Mask& mask,
                        const std::string& name = "f") {
  FactorPanel f;
  f.name = name;
  f.values = values;
  f.mask = mask;
  return f;
}

ReturnPanel returns_from(const Matrix& values, const Mask& mask) {
  ReturnPanel r;
  r.returns = values;
  r.mask = mask;
  r.alignment = ReturnAlignment::forward;
  return r;
}

}  // namespace

TEST_CASE("ridge_solve reproduces the worked 2x2 normal equations") {
  Matrix x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  Vector y(3);
  y << 1, 1, 2;
  const Vector w = ridge_solve(x, y, 1.0);
  // (X'X + I)^{-1} X'y = [[3,1],[1,3]]^{-1} [3,3] = [0.75, 0.75]
  CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("exact-fit factor gets weight 1 and intercept 0") {
  auto [y, mask] = oracle::random_masked(8, 20, 5, 0.0);
  const auto model = fit_combiner({factor_from(y, mask)}, returns_from(y, mask),
                                  0, 8, 0.0, /*standardize=*/false);
  CHECK(model.weights[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(model.intercept == doctest::Approx(0.0).epsilon(1e-10));
  const Vector mu = predict(model, {factor_from(y, mask)}, 3);
  for (int i = 0; i < 20; ++i) {
    REQUIRE(mu[i] == doctest::Approx(y(3, i)).epsilon(1e-10));
  }
}

TEST_CASE("infinite ridge shrinks weights to zero and predicts the mean") {
  auto [x, mask] = oracle::random_masked(10, 15, 6, 0.0);
  auto [y, ymask] = oracle::random_masked(10, 15, 7, 0.0);
  const auto model = fit_combiner({factor_from(x, mask)}, returns_from(y, mask),
                                  0, 10, 1e12, true);
  CHECK(std::abs(model.weights[0]) < 1e-9);
  double pooled_mean = y.mean();
  CHECK(model.intercept == doctest::Approx(pooled_mean).epsilon(1e-6));
}

TEST_CASE("ridge path is monotone in the penalty") {
  auto [x1, mask] = oracle::random_masked(20, 25, 8, 0.0);
  auto [x2, m2] = oracle::random_masked(20, 25, 9, 0.0);
  auto [y, m3] = oracle::random_masked(20, 25, 10, 0.0);
  const std::vector<FactorPanel> fs = {factor_from(x1, mask, "a"),
                                       factor_from(x2, mask, "b")};
  const ReturnPanel r = returns_from(y, mask);
  double prev_norm = std::numeric_limits<double>::infinity();
  for (const double lambda : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const auto model = fit_combiner(fs, r, 0, 20, lambda, true);
    const double norm = model.weights.norm();
    CHECK(norm <= prev_norm + 1e-12);
    prev_norm = norm;
  }
}

TEST_CASE("standardization statistics come only from the training window") {
  auto [x, mask] = oracle::random_masked(30, 10, 11, 0.0);
  auto [y, m2] = oracle::random_masked(30, 10, 12, 0.0);
  const auto model1 = fit_combiner({factor_from(x, mask)},
                                   returns_from(y, mask), 0, 15, 0.5, true);
  Matrix x_shifted = x;
  Matrix y_shifted = y;
  x_shifted.bottomRows(10).array() += 100.0;  // post-window corruption
  y_shifted.bottomRows(10).array() -= 50.0;
  const auto model2 =
      fit_combiner({factor_from(x_shifted, mask)},
                   returns_from(y_shifted, mask), 0, 15, 0.5, true);
  CHECK(model1.weights[0] == model2.weights[0]);
  CHECK(model1.intercept == model2.intercept);
  CHECK(model1.feature_mean[0] == model2.feature_mean[0]);
  CHECK(model1.feature_std[0] == model2.feature_std[0]);
}

TEST_CASE("prediction is affine in the exposures") {
  CombinerModel model;
  model.weights = Vector(2);
  model.weights << 1.0, 0.0;
  model.intercept = 0.25;
  model.feature_mean = Vector::Zero(2);
  model.feature_std = Vector::Ones(2);
  model.factor_names = {"a", "b"};
  auto [x1, mask] = oracle::random_masked(3, 6, 13, 0.0);
  auto [x2, m2] = oracle::random_masked(3, 6, 14, 0.0);
  const std::vector<FactorPanel> fs = {factor_from(x1, mask, "a"),
                                       factor_from(x2, mask, "b")};
  const Vector mu = predict(model, fs, 1);
  for (int i = 0; i < 6; ++i) {
    REQUIRE(mu[i] == doctest::Approx(0.25 + x1(1, i)).epsilon(1e-12));
  }
}

TEST_CASE("missing exposures give missing predictions") {
  auto [x, mask] = oracle::random_masked(4, 5, 15, 0.0);
  Mask holed = mask;
  holed(2, 3) = false;
  auto [y, m2] = oracle::random_masked(4, 5, 16, 0.0);
  const auto model = fit_combiner({factor_from(x, holed)},
                                  returns_from(y, mask), 0, 4, 0.1, true);
  const Vector mu = predict(model, {factor_from(x, holed)}, 2);
  CHECK_FALSE(std::isfinite(mu[3]));
  CHECK(std::isfinite(mu[0]));
}

TEST_CASE("model round-trips through CSV") {
  auto [x, mask] = oracle::random_masked(10, 8, 17, 0.0);
  auto [y, m2] = oracle::random_masked(10, 8, 18, 0.0);
  const auto model = fit_combiner({factor_from(x, mask, "alpha")},
                                  returns_from(y, mask), 0, 10, 2.5, true);
  const std::string path = "/tmp/crossalpha_combiner.csv";
  write_combiner(model, path);
  const CombinerModel back = read_combiner(path);
  CHECK(back.weights[0] == model.weights[0]);
  CHECK(back.intercept == model.intercept);
  CHECK(back.ridge_lambda == model.ridge_lambda);
  CHECK(back.feature_mean[0] == model.feature_mean[0]);
  CHECK(back.feature_std[0] == model.feature_std[0]);
  CHECK(back.factor_names == model.factor_names);
}

TEST_CASE("planted alpha is predictable out of sample") {
  int passes = 0;
  const int n_seeds = 5;
  for (int seed = 0; seed < n_seeds; ++seed) {
    SynthMarketConfig cfg;
    cfg.n_securities = 100;
    cfg.n_days = 260;
    cfg.signal.strength = 0.3;
    cfg.signal.horizon = 5;
    auto [panel, planted] = generate_market(cfg, 500 + seed);
    const ReturnPanel fwd = forward_returns(panel, 5);
    const int split = 150;
    const auto model =
        fit_combiner({planted}, fwd, 0, split - 5, 1.0, true);
    // out-of-sample rank correlation between predictions and realizations
    double corr_sum = 0.0;
    int corr_count = 0;
    for (int t = split; t + 5 < panel.rows(); ++t) {
      const Vector mu = predict(model, {planted}, t);
      std::vector<double> a, b;
      for (int i = 0; i < panel.cols(); ++i) {
        if (std::isfinite(mu[i]) && fwd.mask(t, i)) {
          a.push_back(mu[i]);
          b.push_back(fwd.returns(t, i));
        }
      }
      const double c = oracle::pearson(a, b);
      if (std::isfinite(c)) { corr_sum += c; ++corr_count; }
    }
    if (corr_sum / corr_count > 0.15) ++passes;
  }
  CHECK(passes >= 4);
}
