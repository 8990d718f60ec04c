#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace segsca {

// Per-area regression data. Rows carry a country label for grouped
// estimators. No missing values are allowed here; imputation happens before
// construction. Row weights are reserved (all 1) and not yet configurable.
struct DesignMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> country;
  Eigen::VectorXd outcome;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates; // n x k, aligned with covariate_names
  bool standardized = false;

  std::size_t n_rows() const { return row_ids.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }
  void validate() const;
  std::vector<std::vector<std::size_t>> country_blocks() const;
};

// Returns a copy with each covariate z-scored over the rows (sample sd).
DesignMatrix standardize_covariates(const DesignMatrix& design);

struct FitResult {
  std::string estimator;
  std::map<std::string, double> coefficients; // includes "(intercept)" when fit
  double rss = 0.0;
  int rank = 0;
  double sigma2_e = 0.0; // idiosyncratic variance (where estimated)
  double sigma2_u = 0.0; // country-intercept variance (random intercept only)
  bool fell_back_to_pooled = false;
  std::size_t n_rows = 0;
  std::size_t n_countries = 0;

  double coefficient(const std::string& name) const;
};

FitResult fit_pooled(const DesignMatrix& design);

// Within-country demeaning; coefficients equal OLS with explicit country
// dummy columns. Covariates without within-country variation are an error.
FitResult fit_fixed_effects(const DesignMatrix& design);

struct RandomInterceptOptions {
  // Test hook: forces the quasi-demeaning weight for every country.
  // 0 reproduces pooled OLS, 1 reproduces the within estimator.
  std::optional<double> theta_override;
};

// Two-step feasible GLS: variance components from within/between residual
// moments (clamped at zero), then OLS on quasi-demeaned data. Falls back to
// pooled OLS (flagged) when the idiosyncratic variance is not estimable.
FitResult fit_random_intercept(const DesignMatrix& design,
                               const RandomInterceptOptions& options = {});

double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Correlation of x and y after both are residualized on [1, controls].
double partial_correlation(std::span<const double> x, std::span<const double> y,
                           const Eigen::MatrixXd& controls);

} // namespace segsca
