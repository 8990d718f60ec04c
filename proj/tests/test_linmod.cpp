#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "linmod.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace segsca;

namespace {

DesignMatrix make_design(const std::vector<std::string>& countries,
                         const std::vector<double>& y,
                         const std::vector<std::string>& names,
                         const std::vector<std::vector<double>>& rows) {
  DesignMatrix d;
  const std::size_t n = countries.size();
  d.country = countries;
  for (std::size_t i = 0; i < n; ++i) d.row_ids.push_back("R" + std::to_string(i));
  d.outcome = Eigen::VectorXd(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) d.outcome[static_cast<Eigen::Index>(i)] = y[i];
  d.covariate_names = names;
  d.covariates = Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      d.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return d;
}

// Random design: k covariates ~ N(0,1), y = sum(beta_j x_j) + country
// intercept + noise. Returns the design plus the row-major covariate copy
// the oracles want.
struct RandomDesign {
  DesignMatrix design;
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  std::vector<std::string> country;
};

RandomDesign random_design(std::uint64_t seed, std::size_t n_rows,
                           std::size_t n_countries, std::size_t k,
                           double country_sd = 1.0, double noise_sd = 0.5) {
  Rng rng(seed);
  RandomDesign out;
  std::vector<double> alpha(n_countries);
  for (auto& a : alpha) a = country_sd * rng.normal();
  std::vector<double> beta(k);
  for (std::size_t j = 0; j < k; ++j) beta[j] = rng.uniform(-2.0, 2.0);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));

  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::size_t c = i % n_countries;
    out.country.push_back("C" + std::to_string(c));
    std::vector<double> row(k);
    double mean = alpha[c];
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = rng.normal();
      mean += beta[j] * row[j];
    }
    out.X.push_back(row);
    out.y.push_back(mean + noise_sd * rng.normal());
  }
  out.design = make_design(out.country, out.y, names, out.X);
  return out;
}

} // namespace

TEST_CASE("fixed effects recovers an exact linear law") {
  // y = 2x + country constant, zero noise.
  std::vector<std::string> countries;
  std::vector<double> y;
  std::vector<std::vector<double>> rows;
  const double constants[] = {5.0, -2.0, 10.0};
  double x = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 3; ++i) {
      x += 1.0;
      countries.push_back(std::string("C") + char('A' + c));
      rows.push_back({x});
      y.push_back(2.0 * x + constants[c]);
    }
  const DesignMatrix design = make_design(countries, y, {"x"}, rows);
  const FitResult fit = fit_fixed_effects(design);
  CHECK(fit.coefficient("x") == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.estimator == "fixed_effects");
  CHECK(fit.n_countries == 3);
}

TEST_CASE("fixed effects equals explicit-dummy least squares") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RandomDesign rd = random_design(seed, 40, 4, 3);
    const FitResult fit = fit_fixed_effects(rd.design);
    const std::vector<double> want = oracle::fe_dummy_ols(rd.X, rd.y, rd.country);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(fit.coefficient("x" + std::to_string(j + 1)) ==
            doctest::Approx(want[j]).epsilon(1e-8));
  }
}

TEST_CASE("fixed effects rejects covariates without within variation") {
  // x2 equals its country mean everywhere.
  std::vector<std::string> countries = {"A", "A", "A", "B", "B", "B"};
  std::vector<std::vector<double>> rows = {{1.0, 4.0}, {2.0, 4.0}, {3.0, 4.0},
                                           {2.0, 9.0}, {4.0, 9.0}, {6.0, 9.0}};
  std::vector<double> y = {1, 2, 3, 4, 5, 6};
  const DesignMatrix design = make_design(countries, y, {"x1", "x2"}, rows);
  try {
    fit_fixed_effects(design);
    FAIL("expected a rank-deficiency error");
  } catch (const RankDeficiencyError& e) {
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
    REQUIRE(e.columns().size() == 1);
    CHECK(e.columns()[0] == "x2");
  }
}

TEST_CASE("fixed effects needs enough degrees of freedom and countries") {
  const RandomDesign small = random_design(3, 6, 2, 4);
  CHECK_THROWS_WITH_AS(fit_fixed_effects(small.design),
                       doctest::Contains("degrees of freedom"), ValidationError);

  const RandomDesign one_country = random_design(4, 10, 1, 2);
  CHECK_THROWS_WITH_AS(fit_fixed_effects(one_country.design),
                       doctest::Contains("two countries"), ValidationError);
}

TEST_CASE("pooled OLS matches the normal-equations oracle") {
  const RandomDesign rd = random_design(7, 30, 3, 2);
  const FitResult fit = fit_pooled(rd.design);
  std::vector<std::vector<double>> with_const;
  for (const auto& row : rd.X) {
    std::vector<double> r = {1.0};
    r.insert(r.end(), row.begin(), row.end());
    with_const.push_back(r);
  }
  const std::vector<double> want = oracle::ols(with_const, rd.y);
  CHECK(fit.coefficient("(intercept)") == doctest::Approx(want[0]).epsilon(1e-8));
  CHECK(fit.coefficient("x1") == doctest::Approx(want[1]).epsilon(1e-8));
  CHECK(fit.coefficient("x2") == doctest::Approx(want[2]).epsilon(1e-8));
  CHECK(fit.rank == 3);
  CHECK(fit.rss >= 0.0);
}

TEST_CASE("design matrix validation") {
  DesignMatrix d = random_design(1, 10, 2, 2).design;
  d.outcome[0] = std::nan("");
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("non-finite"),
                       ValidationError);

  DesignMatrix mismatched = random_design(1, 10, 2, 2).design;
  mismatched.covariate_names.pop_back();
  CHECK_THROWS_AS(mismatched.validate(), ValidationError);

  DesignMatrix empty;
  CHECK_THROWS_AS(empty.validate(), ValidationError);

  const FitResult fit = fit_pooled(random_design(2, 12, 2, 1).design);
  CHECK_THROWS_AS(fit.coefficient("nope"), ValidationError);
}

TEST_CASE("random intercept: zero between variance collapses to pooled") {
  // Three countries with identical rows: the between-means regression fits
  // perfectly, so the moment estimate of the intercept variance clamps at 0.
  std::vector<std::string> countries;
  std::vector<double> y;
  std::vector<std::vector<double>> rows;
  Rng rng(12);
  std::vector<double> xs, ys;
  for (int i = 0; i < 6; ++i) {
    xs.push_back(rng.normal());
    ys.push_back(1.5 * xs.back() + rng.normal());
  }
  for (const char* c : {"A", "B", "C"})
    for (int i = 0; i < 6; ++i) {
      countries.push_back(c);
      rows.push_back({xs[static_cast<std::size_t>(i)]});
      y.push_back(ys[static_cast<std::size_t>(i)]);
    }
  const DesignMatrix design = make_design(countries, y, {"x"}, rows);
  const FitResult ri = fit_random_intercept(design);
  const FitResult pooled = fit_pooled(design);
  CHECK(ri.sigma2_u == 0.0);
  CHECK_FALSE(ri.fell_back_to_pooled);
  CHECK(ri.coefficient("x") == doctest::Approx(pooled.coefficient("x")).epsilon(1e-12));
  CHECK(ri.coefficient("(intercept)") ==
        doctest::Approx(pooled.coefficient("(intercept)")).epsilon(1e-12));
}

TEST_CASE("random intercept: theta hooks reproduce the limit estimators") {
  const RandomDesign rd = random_design(21, 36, 4, 2);
  RandomInterceptOptions zero;
  zero.theta_override = 0.0;
  const FitResult as_pooled = fit_random_intercept(rd.design, zero);
  const FitResult pooled = fit_pooled(rd.design);
  CHECK(as_pooled.coefficient("x1") ==
        doctest::Approx(pooled.coefficient("x1")).epsilon(1e-8));
  CHECK(as_pooled.coefficient("x2") ==
        doctest::Approx(pooled.coefficient("x2")).epsilon(1e-8));

  RandomInterceptOptions one;
  one.theta_override = 1.0;
  const FitResult as_within = fit_random_intercept(rd.design, one);
  const FitResult fe = fit_fixed_effects(rd.design);
  CHECK(as_within.coefficient("x1") ==
        doctest::Approx(fe.coefficient("x1")).epsilon(1e-8));
  CHECK(as_within.coefficient("x2") ==
        doctest::Approx(fe.coefficient("x2")).epsilon(1e-8));
}

TEST_CASE("random intercept falls back to pooled when noise vanishes") {
  // Exact fit: the within step leaves zero residual variance.
  std::vector<std::string> countries = {"A", "A", "A", "B", "B", "B"};
  std::vector<std::vector<double>> rows = {{1}, {2}, {3}, {4}, {5}, {6}};
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(3.0 * r[0]);
  const DesignMatrix design = make_design(countries, y, {"x"}, rows);
  const FitResult fit = fit_random_intercept(design);
  CHECK(fit.fell_back_to_pooled);
  CHECK(fit.estimator == "random_intercept");
  CHECK(fit.coefficient("x") == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("random intercept agrees with a maximum-likelihood oracle") {
  // Balanced 3-country, 30-row design with real variance in both layers.
  Rng rng(100);
  std::vector<std::string> countries;
  std::vector<double> y;
  std::vector<std::vector<double>> X;
  const double alpha[] = {0.8, -0.5, 0.1};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 10; ++i) {
      countries.push_back(std::string("C") + char('A' + c));
      const double x = rng.normal();
      X.push_back({x});
      y.push_back(1.0 + 2.0 * x + alpha[c] + 0.6 * rng.normal());
    }
  const DesignMatrix design = make_design(countries, y, {"x"}, X);
  const FitResult fgls = fit_random_intercept(design);
  const oracle::MlRandomInterceptFit ml = oracle::ml_random_intercept(X, y, countries);
  CHECK(fgls.coefficient("x") == doctest::Approx(ml.beta[0]).epsilon(1e-3));
  CHECK(fgls.coefficient("(intercept)") ==
        doctest::Approx(ml.intercept).epsilon(2e-3));
  CHECK(fgls.sigma2_u > 0.0);
}

TEST_CASE("affine equivariance of the fitted slopes") {
  const RandomDesign rd = random_design(31, 40, 4, 2);
  const FitResult base = fit_fixed_effects(rd.design);

  // Rescaling a covariate rescales its slope by the inverse factor.
  DesignMatrix scaled = rd.design;
  scaled.covariates.col(0) *= 4.0;
  const FitResult s = fit_fixed_effects(scaled);
  CHECK(s.coefficient("x1") ==
        doctest::Approx(base.coefficient("x1") / 4.0).epsilon(1e-10));
  CHECK(s.coefficient("x2") == doctest::Approx(base.coefficient("x2")).epsilon(1e-10));

  // Adding a constant to the outcome leaves every slope alone.
  DesignMatrix shifted = rd.design;
  shifted.outcome.array() += 100.0;
  const FitResult t = fit_fixed_effects(shifted);
  CHECK(t.coefficient("x1") == doctest::Approx(base.coefficient("x1")).epsilon(1e-10));
  CHECK(t.coefficient("x2") == doctest::Approx(base.coefficient("x2")).epsilon(1e-10));

  const FitResult pooled_base = fit_pooled(rd.design);
  const FitResult pooled_shift = fit_pooled(shifted);
  CHECK(pooled_shift.coefficient("x1") ==
        doctest::Approx(pooled_base.coefficient("x1")).epsilon(1e-10));
}

TEST_CASE("counterfactual outcome refits to an exact zero") {
  const RandomDesign rd = random_design(41, 48, 4, 3);
  for (auto fitter : {+[](const DesignMatrix& d) { return fit_fixed_effects(d); },
                      +[](const DesignMatrix& d) { return fit_random_intercept(d); }}) {
    const FitResult fit = fitter(rd.design);
    DesignMatrix null_design = rd.design;
    null_design.outcome -= fit.coefficient("x2") * null_design.covariates.col(1);
    const FitResult refit = fitter(null_design);
    CHECK(std::abs(refit.coefficient("x2")) <= 1e-10);
  }
}

TEST_CASE("standardize_covariates z-scores every column") {
  const RandomDesign rd = random_design(51, 25, 3, 2);
  const DesignMatrix z = standardize_covariates(rd.design);
  CHECK(z.standardized);
  for (int j = 0; j < 2; ++j) {
    const double mean = z.covariates.col(j).mean();
    const double sd = std::sqrt(
        (z.covariates.col(j).array() - mean).square().sum() /
        static_cast<double>(z.covariates.rows() - 1));
    CHECK(std::abs(mean) < 1e-12);
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
  }

  DesignMatrix constant = rd.design;
  constant.covariates.col(0).setConstant(5.0);
  CHECK_THROWS_WITH_AS(standardize_covariates(constant), doctest::Contains("x1"),
                       ValidationError);
}

TEST_CASE("correlation utilities") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y_pos = {2, 4, 6, 8, 10};
  std::vector<double> y_neg;
  for (double v : y_pos) y_neg.push_back(-v);
  CHECK(pearson_correlation(x, y_pos) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_correlation(x, y_neg) == doctest::Approx(-1.0).epsilon(1e-12));

  const std::vector<double> flat = {3, 3, 3, 3, 3};
  CHECK_THROWS_WITH_AS(pearson_correlation(x, flat),
                       doctest::Contains("zero variance"), ValidationError);
  const std::vector<double> two = {1, 2};
  CHECK_THROWS_AS(pearson_correlation(two, two), ValidationError);
}

TEST_CASE("partial correlation matches the residual-on-residual oracle") {
  const std::vector<double> x = {1.0, 2.0, 4.0, 4.5, 7.0};
  const std::vector<double> y = {2.0, 1.5, 5.0, 6.5, 9.0};
  const std::vector<double> z = {0.5, 1.0, 2.0, 3.5, 4.0};

  Eigen::MatrixXd controls(5, 1);
  for (int i = 0; i < 5; ++i) controls(i, 0) = z[static_cast<std::size_t>(i)];
  const double got = partial_correlation(x, y, controls);

  // Residualize both series on [1, z] by explicit OLS, then correlate.
  std::vector<std::vector<double>> design;
  for (double v : z) design.push_back({1.0, v});
  const std::vector<double> bx = oracle::ols(design, x);
  const std::vector<double> by = oracle::ols(design, y);
  std::vector<double> rx, ry;
  for (std::size_t i = 0; i < 5; ++i) {
    rx.push_back(x[i] - bx[0] - bx[1] * z[i]);
    ry.push_back(y[i] - by[0] - by[1] * z[i]);
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    sxy += rx[i] * ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
  }
  CHECK(got == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-10));
}
