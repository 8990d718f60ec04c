#include "linmod.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "error.hpp"

namespace segsca {

void DesignMatrix::validate() const {
  const auto n = static_cast<Eigen::Index>(row_ids.size());
  if (n == 0) throw ValidationError("design matrix has no rows");
  if (static_cast<Eigen::Index>(country.size()) != n ||
      outcome.size() != n || covariates.rows() != n)
    throw ValidationError("design matrix fields have inconsistent row counts");
  if (covariates.cols() != static_cast<Eigen::Index>(covariate_names.size()))
    throw ValidationError("design matrix column names do not match data");
  if (!outcome.allFinite() || !covariates.allFinite())
    throw ValidationError("design matrix contains non-finite values; "
                          "impute or drop missing rows first");
}

std::vector<std::vector<std::size_t>> DesignMatrix::country_blocks() const {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> blocks;
  for (std::size_t i = 0; i < country.size(); ++i) {
    auto [it, inserted] = index.try_emplace(country[i], blocks.size());
    if (inserted) blocks.emplace_back();
    blocks[it->second].push_back(i);
  }
  return blocks;
}

DesignMatrix standardize_covariates(const DesignMatrix& design) {
  design.validate();
  DesignMatrix out = design;
  const auto n = static_cast<double>(design.n_rows());
  if (n < 2) throw ValidationError("standardization needs at least two rows");
  for (Eigen::Index j = 0; j < out.covariates.cols(); ++j) {
    auto col = out.covariates.col(j);
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0))
      throw ValidationError("covariate '" + design.covariate_names[j] +
                            "' has zero variance; cannot standardize");
    col = (col.array() - mean) / sd;
  }
  out.standardized = true;
  return out;
}

double FitResult::coefficient(const std::string& name) const {
  auto it = coefficients.find(name);
  if (it == coefficients.end())
    throw ValidationError("no coefficient for covariate '" + name + "'");
  return it->second;
}

namespace {

struct Solved {
  Eigen::VectorXd beta;
  double rss = 0.0;
  int rank = 0;
};

// Least squares via column-pivoted Householder QR. Rank deficiency is an
// error naming the columns the pivoting rejected.
Solved solve_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<std::string>& names,
                           const std::string& context) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  const int rank = static_cast<int>(qr.rank());
  if (rank < X.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    std::vector<std::string> dropped;
    for (Eigen::Index i = rank; i < X.cols(); ++i)
      dropped.push_back(names[static_cast<std::size_t>(perm[i])]);
    std::string msg = context + ": rank-deficient design; covariate";
    msg += dropped.size() > 1 ? "s" : "";
    for (std::size_t i = 0; i < dropped.size(); ++i)
      msg += (i ? ", '" : " '") + dropped[i] + "'";
    msg += " cannot be identified";
    throw RankDeficiencyError(msg, std::move(dropped));
  }
  Solved s;
  s.beta = qr.solve(y);
  s.rss = (y - X * s.beta).squaredNorm();
  s.rank = rank;
  return s;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(X.cols()) = X;
  return out;
}

std::vector<std::string> names_with_intercept(
    const std::vector<std::string>& names) {
  std::vector<std::string> out = {"(intercept)"};
  out.insert(out.end(), names.begin(), names.end());
  return out;
}

struct Demeaned {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Eigen::VectorXd country_y_mean;  // per block
  Eigen::MatrixXd country_x_mean;  // block x covariate
};

Demeaned within_demean(const DesignMatrix& d,
                       const std::vector<std::vector<std::size_t>>& blocks) {
  Demeaned out;
  out.y = d.outcome;
  out.X = d.covariates;
  out.country_y_mean.resize(static_cast<Eigen::Index>(blocks.size()));
  out.country_x_mean.resize(static_cast<Eigen::Index>(blocks.size()),
                            d.covariates.cols());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& rows = blocks[b];
    const double nb = static_cast<double>(rows.size());
    double y_mean = 0.0;
    for (std::size_t r : rows) y_mean += d.outcome[static_cast<Eigen::Index>(r)];
    y_mean /= nb;
    out.country_y_mean[static_cast<Eigen::Index>(b)] = y_mean;
    for (Eigen::Index j = 0; j < d.covariates.cols(); ++j) {
      double x_mean = 0.0;
      for (std::size_t r : rows)
        x_mean += d.covariates(static_cast<Eigen::Index>(r), j);
      x_mean /= nb;
      out.country_x_mean(static_cast<Eigen::Index>(b), j) = x_mean;
      for (std::size_t r : rows)
        out.X(static_cast<Eigen::Index>(r), j) -= x_mean;
    }
    for (std::size_t r : rows) out.y[static_cast<Eigen::Index>(r)] -= y_mean;
  }
  return out;
}

// Columns whose within-country variation is numerically zero (relative to
// the column's own scale). These cannot enter a within regression.
std::vector<std::size_t> no_within_variation(const DesignMatrix& d,
                                             const Demeaned& dm) {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < d.covariates.cols(); ++j) {
    const double within_ss = dm.X.col(j).squaredNorm();
    const double total_ss = d.covariates.col(j).squaredNorm();
    if (within_ss <= 1e-20 * std::max(1.0, total_ss))
      out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

} // namespace

FitResult fit_pooled(const DesignMatrix& design) {
  design.validate();
  const auto n = static_cast<Eigen::Index>(design.n_rows());
  const auto k = static_cast<Eigen::Index>(design.n_covariates());
  if (n - k - 1 < 1)
    throw ValidationError("pooled fit has more covariates than degrees of freedom");

  const Eigen::MatrixXd X = with_intercept(design.covariates);
  const auto names = names_with_intercept(design.covariate_names);
  const Solved s = solve_least_squares(X, design.outcome, names, "pooled fit");

  FitResult fit;
  fit.estimator = "pooled";
  for (std::size_t i = 0; i < names.size(); ++i)
    fit.coefficients[names[i]] = s.beta[static_cast<Eigen::Index>(i)];
  fit.rss = s.rss;
  fit.rank = s.rank;
  fit.sigma2_e = s.rss / static_cast<double>(n - k - 1);
  fit.n_rows = design.n_rows();
  fit.n_countries = design.country_blocks().size();
  return fit;
}

FitResult fit_fixed_effects(const DesignMatrix& design) {
  design.validate();
  const auto blocks = design.country_blocks();
  if (blocks.size() < 2)
    throw ValidationError("fixed-effects fit needs at least two countries");
  const auto n = static_cast<Eigen::Index>(design.n_rows());
  const auto c = static_cast<Eigen::Index>(blocks.size());
  const auto k = static_cast<Eigen::Index>(design.n_covariates());
  if (n - c - k < 1)
    throw ValidationError(
        "fixed-effects fit has more covariates than degrees of freedom");

  const Demeaned dm = within_demean(design, blocks);
  if (const auto flat = no_within_variation(design, dm); !flat.empty()) {
    std::vector<std::string> names;
    for (std::size_t j : flat) names.push_back(design.covariate_names[j]);
    std::string msg = "fixed-effects fit: covariate";
    msg += names.size() > 1 ? "s" : "";
    for (std::size_t i = 0; i < names.size(); ++i)
      msg += (i ? ", '" : " '") + names[i] + "'";
    msg += " ha";
    msg += names.size() > 1 ? "ve" : "s";
    msg += " no within-country variation";
    throw RankDeficiencyError(msg, std::move(names));
  }

  const Solved s =
      solve_least_squares(dm.X, dm.y, design.covariate_names, "fixed-effects fit");

  FitResult fit;
  fit.estimator = "fixed_effects";
  for (std::size_t i = 0; i < design.covariate_names.size(); ++i)
    fit.coefficients[design.covariate_names[i]] =
        s.beta[static_cast<Eigen::Index>(i)];
  fit.rss = s.rss;
  fit.rank = s.rank;
  fit.sigma2_e = s.rss / static_cast<double>(n - c - k);
  fit.n_rows = design.n_rows();
  fit.n_countries = blocks.size();
  return fit;
}

FitResult fit_random_intercept(const DesignMatrix& design,
                               const RandomInterceptOptions& options) {
  design.validate();
  const auto blocks = design.country_blocks();
  if (blocks.size() < 2)
    throw ValidationError("random-intercept fit needs at least two countries");
  const auto n = static_cast<Eigen::Index>(design.n_rows());
  const auto c = static_cast<Eigen::Index>(blocks.size());
  const auto k = static_cast<Eigen::Index>(design.n_covariates());

  const Demeaned dm = within_demean(design, blocks);

  double sigma2_e = 0.0;
  double sigma2_u = 0.0;
  if (!options.theta_override) {
    // Step 1: idiosyncratic variance from the within regression, using only
    // covariates that actually vary within countries.
    const auto flat = no_within_variation(design, dm);
    std::vector<Eigen::Index> within_cols;
    for (Eigen::Index j = 0; j < k; ++j)
      if (std::find(flat.begin(), flat.end(), static_cast<std::size_t>(j)) ==
          flat.end())
        within_cols.push_back(j);

    const auto kw = static_cast<Eigen::Index>(within_cols.size());
    const Eigen::Index dof_within = n - c - kw;
    bool fallback = kw == 0 || dof_within < 1;
    if (!fallback) {
      Eigen::MatrixXd Xw(n, kw);
      std::vector<std::string> names_w;
      for (Eigen::Index j = 0; j < kw; ++j) {
        Xw.col(j) = dm.X.col(within_cols[static_cast<std::size_t>(j)]);
        names_w.push_back(
            design.covariate_names[static_cast<std::size_t>(
                within_cols[static_cast<std::size_t>(j)])]);
      }
      const Solved within =
          solve_least_squares(Xw, dm.y, names_w, "random-intercept within step");
      sigma2_e = within.rss / static_cast<double>(dof_within);
      if (!(sigma2_e > 0.0)) fallback = true;
    }
    if (fallback) {
      FitResult fit = fit_pooled(design);
      fit.estimator = "random_intercept";
      fit.fell_back_to_pooled = true;
      fit.sigma2_u = 0.0;
      return fit;
    }

    // Step 2: country-intercept variance from the between regression on
    // country means. E[between mean square] = sigma2_u + sigma2_e * mean(1/n_c).
    Eigen::MatrixXd Xb = with_intercept(dm.country_x_mean);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_b(Xb);
    const Eigen::VectorXd beta_b = qr_b.solve(dm.country_y_mean);
    const double rss_b = (dm.country_y_mean - Xb * beta_b).squaredNorm();
    const auto rank_b = static_cast<Eigen::Index>(qr_b.rank());
    const Eigen::Index dof_between = c - rank_b;
    if (dof_between >= 1) {
      double mean_inv_n = 0.0;
      for (const auto& rows : blocks)
        mean_inv_n += 1.0 / static_cast<double>(rows.size());
      mean_inv_n /= static_cast<double>(blocks.size());
      const double sigma2_between = rss_b / static_cast<double>(dof_between);
      sigma2_u = std::max(0.0, sigma2_between - sigma2_e * mean_inv_n);
    }
  }

  // Step 3: quasi-demeaned OLS with an intercept column scaled per country.
  Eigen::VectorXd y_t = design.outcome;
  Eigen::MatrixXd X_t(n, k + 1);
  X_t.col(0).setOnes();
  X_t.rightCols(k) = design.covariates;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& rows = blocks[b];
    const double nb = static_cast<double>(rows.size());
    const double theta =
        options.theta_override
            ? *options.theta_override
            : 1.0 - std::sqrt(sigma2_e / (sigma2_e + nb * sigma2_u));
    for (std::size_t r : rows) {
      const auto ri = static_cast<Eigen::Index>(r);
      y_t[ri] -= theta * dm.country_y_mean[static_cast<Eigen::Index>(b)];
      X_t(ri, 0) -= theta;
      for (Eigen::Index j = 0; j < k; ++j)
        X_t(ri, j + 1) -= theta * dm.country_x_mean(static_cast<Eigen::Index>(b), j);
    }
  }

  // At the theta=1 limit the transformed intercept (and any country-constant
  // column) vanishes; such columns are excluded and reported as 0.
  auto names = names_with_intercept(design.covariate_names);
  std::vector<Eigen::Index> live;
  std::vector<std::string> live_names;
  std::vector<std::string> dropped_names;
  for (Eigen::Index j = 0; j < X_t.cols(); ++j) {
    const double scale =
        j == 0 ? 1.0 : design.covariates.col(j - 1).cwiseAbs().maxCoeff();
    if (X_t.col(j).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, scale)) {
      dropped_names.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      live.push_back(j);
      live_names.push_back(names[static_cast<std::size_t>(j)]);
    }
  }
  Eigen::MatrixXd X_live(n, static_cast<Eigen::Index>(live.size()));
  for (std::size_t j = 0; j < live.size(); ++j)
    X_live.col(static_cast<Eigen::Index>(j)) = X_t.col(live[j]);

  const Solved s =
      solve_least_squares(X_live, y_t, live_names, "random-intercept fit");

  FitResult fit;
  fit.estimator = "random_intercept";
  for (std::size_t j = 0; j < live_names.size(); ++j)
    fit.coefficients[live_names[j]] = s.beta[static_cast<Eigen::Index>(j)];
  for (const auto& name : dropped_names) fit.coefficients[name] = 0.0;
  fit.rss = s.rss;
  fit.rank = s.rank;
  fit.sigma2_e = sigma2_e;
  fit.sigma2_u = sigma2_u;
  fit.n_rows = design.n_rows();
  fit.n_countries = blocks.size();
  return fit;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw ValidationError("correlation needs at least three points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw ValidationError("correlation input has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double partial_correlation(std::span<const double> x, std::span<const double> y,
                           const Eigen::MatrixXd& controls) {
  if (x.size() != y.size() ||
      controls.rows() != static_cast<Eigen::Index>(x.size()))
    throw ValidationError("partial correlation inputs differ in length");
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n - controls.cols() - 1 < 3)
    throw ValidationError("partial correlation has too few residual degrees of freedom");

  const Eigen::MatrixXd Z = with_intercept(controls);
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  const Eigen::VectorXd rx = xv - Z * qr.solve(xv);
  const Eigen::VectorXd ry = yv - Z * qr.solve(yv);
  std::span<const double> rxs(rx.data(), static_cast<std::size_t>(rx.size()));
  std::span<const double> rys(ry.data(), static_cast<std::size_t>(ry.size()));
  return pearson_correlation(rxs, rys);
}

} // namespace segsca
