#include "sca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace segsca {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Guard against float noise when a share lands exactly on the threshold.
constexpr double kPassThreshold = 0.95 - 1e-12;
} // namespace

std::string to_string(VarLevel level) {
  return level == VarLevel::fua ? "fua" : "country";
}

std::string to_string(VarRole role) {
  switch (role) {
    case VarRole::outcome: return "outcome";
    case VarRole::base_control: return "base_control";
    case VarRole::candidate: return "candidate";
    case VarRole::country_candidate: return "country_candidate";
  }
  return "?";
}

VarLevel var_level_from_string(const std::string& s) {
  if (s == "fua") return VarLevel::fua;
  if (s == "country") return VarLevel::country;
  throw ValidationError("unknown variable level '" + s + "'");
}

VarRole var_role_from_string(const std::string& s) {
  if (s == "outcome") return VarRole::outcome;
  if (s == "base_control") return VarRole::base_control;
  if (s == "candidate") return VarRole::candidate;
  if (s == "country_candidate") return VarRole::country_candidate;
  throw ValidationError("unknown variable role '" + s + "'");
}

void Catalog::validate() const {
  if (vars.empty()) throw ValidationError("variable catalog is empty");
  std::set<std::string> names;
  std::size_t outcomes = 0;
  for (const auto& v : vars) {
    if (v.name.empty()) throw ValidationError("catalog has a variable without a name");
    if (!names.insert(v.name).second)
      throw ValidationError("catalog lists variable '" + v.name + "' twice");
    switch (v.role) {
      case VarRole::outcome:
        ++outcomes;
        break;
      case VarRole::candidate:
        if (v.level != VarLevel::fua)
          throw ValidationError("candidate '" + v.name + "' must be fua-level");
        if (v.subgroup.empty())
          throw ValidationError("candidate '" + v.name + "' needs a subgroup");
        break;
      case VarRole::country_candidate:
        if (v.level != VarLevel::country)
          throw ValidationError("country candidate '" + v.name +
                                "' must be country-level");
        if (v.subgroup.empty())
          throw ValidationError("country candidate '" + v.name +
                                "' needs a subgroup");
        break;
      case VarRole::base_control:
        break;
    }
  }
  if (outcomes > 1) throw ValidationError("catalog lists more than one outcome");
}

const VariableMeta* Catalog::find(const std::string& name) const {
  for (const auto& v : vars)
    if (v.name == name) return &v;
  return nullptr;
}

std::vector<std::string> Catalog::base_controls() const {
  std::vector<std::string> out;
  for (const auto& v : vars)
    if (v.role == VarRole::base_control) out.push_back(v.name);
  return out;
}

std::vector<VariableMeta> Catalog::candidates() const {
  std::vector<VariableMeta> out;
  for (const auto& v : vars)
    if (v.role == VarRole::candidate) out.push_back(v);
  return out;
}

std::vector<VariableMeta> Catalog::country_candidates() const {
  std::vector<VariableMeta> out;
  for (const auto& v : vars)
    if (v.role == VarRole::country_candidate) out.push_back(v);
  return out;
}

std::optional<std::string> Catalog::outcome_name() const {
  for (const auto& v : vars)
    if (v.role == VarRole::outcome) return v.name;
  return std::nullopt;
}

Catalog Catalog::from_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::string label = path.filename().string();
  const std::size_t col_name = table.require_column("name", label);
  const std::size_t col_level = table.require_column("level", label);
  const std::size_t col_group = table.require_column("group", label);
  const std::size_t col_subgroup = table.require_column("subgroup", label);
  const std::size_t col_role = table.require_column("role", label);

  Catalog catalog;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where =
        label + " line " + std::to_string(table.line_numbers[r]);
    VariableMeta meta;
    meta.name = row[col_name];
    try {
      meta.level = var_level_from_string(row[col_level]);
      meta.role = var_role_from_string(row[col_role]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    meta.group = row[col_group];
    meta.subgroup = row[col_subgroup];
    catalog.vars.push_back(std::move(meta));
  }
  catalog.validate();
  return catalog;
}

void Catalog::to_csv(const std::filesystem::path& path) const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& v : vars)
    rows.push_back({v.name, to_string(v.level), v.group, v.subgroup,
                    to_string(v.role)});
  write_csv(path, {"name", "level", "group", "subgroup", "role"}, rows);
}

std::string to_string(Estimator e) {
  return e == Estimator::fixed_effects ? "fixed_effects" : "random_intercept";
}

Estimator estimator_from_string(const std::string& s) {
  if (s == "fixed_effects" || s == "fe") return Estimator::fixed_effects;
  if (s == "random_intercept" || s == "multilevel" || s == "ri")
    return Estimator::random_intercept;
  throw ValidationError("unknown estimator '" + s + "'");
}

void SpecLimits::validate() const {
  if (min_focal < 1 || max_focal < min_focal)
    throw ValidationError("focal subset limits must satisfy 1 <= min <= max");
  if (min_country < 0 || max_country < min_country)
    throw ValidationError("country subset limits must satisfy 0 <= min <= max");
}

bool Specification::contains(const std::string& name) const {
  return std::find(focal.begin(), focal.end(), name) != focal.end() ||
         std::find(country.begin(), country.end(), name) != country.end();
}

std::vector<std::string> Specification::covariates(const Catalog& catalog) const {
  std::vector<std::string> out = catalog.base_controls();
  out.insert(out.end(), focal.begin(), focal.end());
  out.insert(out.end(), country.begin(), country.end());
  return out;
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Subsets of `pool` with size in [min_size, max_size] and at most one member
// per subgroup key, emitted size-major then lexicographic by pool position.
std::vector<std::vector<std::size_t>> constrained_subsets(
    const std::vector<VariableMeta>& pool, int min_size, int max_size) {
  std::vector<std::vector<std::size_t>> out;
  if (min_size == 0) out.push_back({});
  std::vector<std::size_t> current;
  std::vector<std::string> used_subgroups;

  auto extend = [&](auto&& self, std::size_t start, int want) -> void {
    if (static_cast<int>(current.size()) == want) {
      out.push_back(current);
      return;
    }
    for (std::size_t i = start; i < pool.size(); ++i) {
      const std::string key = pool[i].subgroup_key();
      if (std::find(used_subgroups.begin(), used_subgroups.end(), key) !=
          used_subgroups.end())
        continue;
      current.push_back(i);
      used_subgroups.push_back(key);
      self(self, i + 1, want);
      current.pop_back();
      used_subgroups.pop_back();
    }
  };
  for (int size = std::max(min_size, 1); size <= max_size; ++size)
    extend(extend, 0, size);
  return out;
}

} // namespace

std::string spec_id_of(Estimator estimator,
                       const std::vector<std::string>& focal,
                       const std::vector<std::string>& country) {
  std::string canon = to_string(estimator) + "|f:";
  std::vector<std::string> f = focal;
  std::sort(f.begin(), f.end());
  for (const auto& name : f) canon += name + ",";
  canon += "|c:";
  std::vector<std::string> c = country;
  std::sort(c.begin(), c.end());
  for (const auto& name : c) canon += name + ",";
  return hex64(fnv1a64(canon));
}

std::vector<Specification> enumerate_specs(const Catalog& catalog,
                                           const SpecLimits& limits,
                                           Estimator estimator) {
  catalog.validate();
  limits.validate();
  const auto focal_pool = catalog.candidates();
  if (focal_pool.empty())
    throw ValidationError("catalog has no candidate variables");

  const auto focal_sets =
      constrained_subsets(focal_pool, limits.min_focal, limits.max_focal);
  std::vector<std::vector<std::size_t>> country_sets = {{}};
  std::vector<VariableMeta> country_pool;
  if (estimator == Estimator::random_intercept) {
    country_pool = catalog.country_candidates();
    country_sets =
        constrained_subsets(country_pool, limits.min_country, limits.max_country);
  }

  std::vector<Specification> specs;
  specs.reserve(focal_sets.size() * country_sets.size());
  for (const auto& fset : focal_sets) {
    for (const auto& cset : country_sets) {
      Specification spec;
      spec.estimator = estimator;
      for (std::size_t i : fset) spec.focal.push_back(focal_pool[i].name);
      for (std::size_t i : cset) spec.country.push_back(country_pool[i].name);
      spec.spec_id = spec_id_of(estimator, spec.focal, spec.country);
      specs.push_back(std::move(spec));
    }
  }
  return specs;
}

std::optional<std::size_t> CovariateTable::column_index(
    const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return std::nullopt;
}

std::size_t CovariateTable::require_column(const std::string& name) const {
  if (auto idx = column_index(name)) return *idx;
  throw SchemaError("covariate table has no column '" + name + "'");
}

CovariateTable CovariateTable::select_columns(
    const std::vector<std::string>& names) const {
  CovariateTable out;
  out.row_ids = row_ids;
  out.country = country;
  out.standardized = standardized;
  out.columns = names;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    out.values.col(static_cast<Eigen::Index>(j)) =
        values.col(static_cast<Eigen::Index>(require_column(names[j])));
  return out;
}

CovariateTable CovariateTable::from_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::string label = path.filename().string();
  const std::size_t col_fua = table.require_column("fua_id", label);
  const std::size_t col_country = table.require_column("country", label);

  CovariateTable out;
  std::vector<std::size_t> data_cols;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i == col_fua || i == col_country) continue;
    out.columns.push_back(table.header[i]);
    data_cols.push_back(i);
  }
  if (out.columns.empty())
    throw SchemaError(label + ": no covariate columns besides fua_id/country");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw ValidationError(label + ": no data rows");
  out.values.resize(n, static_cast<Eigen::Index>(out.columns.size()));

  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where =
        label + " line " + std::to_string(table.line_numbers[r]);
    if (row[col_fua].empty()) throw ValidationError(where + ": empty fua_id");
    if (!seen_ids.insert(row[col_fua]).second)
      throw ValidationError(where + ": duplicate fua_id '" + row[col_fua] + "'");
    out.row_ids.push_back(row[col_fua]);
    out.country.push_back(row[col_country]);
    for (std::size_t j = 0; j < data_cols.size(); ++j) {
      const std::string& cell = row[data_cols[j]];
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          is_missing(cell)
              ? kNaN
              : parse_double(cell, where + " column '" + out.columns[j] + "'");
    }
  }
  return out;
}

MissingPolicy missing_policy_from_string(const std::string& s) {
  if (s == "mean") return MissingPolicy::mean_impute;
  if (s == "drop") return MissingPolicy::drop_rows;
  throw ValidationError("unknown missing-data policy '" + s + "'");
}

MissingReport handle_missing(CovariateTable& table, MissingPolicy policy) {
  MissingReport report;
  const Eigen::Index n = table.values.rows();
  const Eigen::Index k = table.values.cols();

  if (policy == MissingPolicy::drop_rows) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!table.values.row(i).hasNaN()) keep.push_back(i);
    report.dropped_rows = static_cast<std::size_t>(n) - keep.size();
    if (keep.empty())
      throw ValidationError("every row has missing values; nothing to fit");
    if (report.dropped_rows > 0) {
      Eigen::MatrixXd values(static_cast<Eigen::Index>(keep.size()), k);
      std::vector<std::string> ids, countries;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        values.row(static_cast<Eigen::Index>(i)) = table.values.row(keep[i]);
        ids.push_back(table.row_ids[static_cast<std::size_t>(keep[i])]);
        countries.push_back(table.country[static_cast<std::size_t>(keep[i])]);
      }
      table.values = std::move(values);
      table.row_ids = std::move(ids);
      table.country = std::move(countries);
    }
    return report;
  }

  for (Eigen::Index j = 0; j < k; ++j) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = table.values(i, j);
      if (!std::isnan(v)) {
        sum += v;
        ++count;
      }
    }
    if (count == 0)
      throw ValidationError("column '" + table.columns[static_cast<std::size_t>(j)] +
                            "' has no observed values to impute from");
    if (count == n) continue;
    const double mean = sum / static_cast<double>(count);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(table.values(i, j))) {
        table.values(i, j) = mean;
        report.imputed.push_back({table.row_ids[static_cast<std::size_t>(i)],
                                  table.columns[static_cast<std::size_t>(j)],
                                  mean});
      }
    }
  }
  return report;
}

void standardize_table(CovariateTable& table,
                       const std::vector<std::string>& column_names) {
  const auto n = static_cast<double>(table.values.rows());
  if (n < 2) throw ValidationError("standardization needs at least two rows");
  for (const auto& name : column_names) {
    const auto j = static_cast<Eigen::Index>(table.require_column(name));
    auto col = table.values.col(j);
    if (col.hasNaN())
      throw ValidationError("column '" + name + "' still has missing values");
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
    if (!(sd > 0.0))
      throw ValidationError("covariate '" + name +
                            "' has zero variance; cannot standardize");
    col = (col.array() - mean) / sd;
  }
  table.standardized = true;
}

DesignMatrix build_design(const CovariateTable& table, const std::string& outcome,
                          const std::vector<std::string>& covariates) {
  DesignMatrix design;
  design.row_ids = table.row_ids;
  design.country = table.country;
  design.standardized = table.standardized;
  design.outcome = table.values.col(
      static_cast<Eigen::Index>(table.require_column(outcome)));
  design.covariate_names = covariates;
  design.covariates.resize(table.values.rows(),
                           static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t j = 0; j < covariates.size(); ++j)
    design.covariates.col(static_cast<Eigen::Index>(j)) = table.values.col(
        static_cast<Eigen::Index>(table.require_column(covariates[j])));
  return design;
}

namespace {

FitResult fit_at(Estimator estimator, const DesignMatrix& design) {
  return estimator == Estimator::fixed_effects ? fit_fixed_effects(design)
                                               : fit_random_intercept(design);
}

} // namespace

CurveResult run_curve(const std::vector<Specification>& all_specs,
                      const Catalog& catalog, const CovariateTable& data,
                      const std::string& outcome, const std::string& variable,
                      int threads) {
  if (!catalog.find(variable))
    throw ValidationError("variable '" + variable + "' is not in the catalog");

  CurveResult curve;
  curve.variable = variable;
  for (const auto& spec : all_specs)
    if (spec.contains(variable)) curve.specs.push_back(spec);
  if (curve.specs.empty())
    throw ValidationError("no specification contains variable '" + variable + "'");
  curve.estimator = curve.specs.front().estimator;

  const std::size_t n_specs = curve.specs.size();
  curve.estimates.assign(n_specs, kNaN);
  std::vector<std::string> errors(n_specs);

  parallel_for(n_specs, threads, [&](std::size_t k) {
    const auto& spec = curve.specs[k];
    try {
      const DesignMatrix design =
          build_design(data, outcome, spec.covariates(catalog));
      const FitResult fit = fit_at(spec.estimator, design);
      curve.estimates[k] = fit.coefficient(variable);
    } catch (const ValidationError& e) {
      errors[k] = e.what();
    } catch (const NumericError& e) {
      errors[k] = e.what();
    }
  });

  std::vector<double> valid_values;
  for (std::size_t k = 0; k < n_specs; ++k) {
    if (std::isnan(curve.estimates[k])) {
      curve.invalid.emplace_back(k, errors[k].empty() ? "fit failed" : errors[k]);
    } else {
      curve.valid_idx.push_back(k);
      valid_values.push_back(curve.estimates[k]);
    }
  }
  if (valid_values.empty())
    throw NumericError("every specification for variable '" + variable +
                       "' failed to fit");
  curve.median_estimate = median_of(std::move(valid_values));
  curve.dominant_sign =
      curve.median_estimate > 0.0 ? 1 : (curve.median_estimate < 0.0 ? -1 : 0);
  return curve;
}

std::vector<double> counterfactual_estimates(const CurveResult& curve,
                                             const Catalog& catalog,
                                             const CovariateTable& data,
                                             const std::string& outcome,
                                             std::span<const std::size_t> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  CovariateTable sample;
  sample.columns = data.columns;
  sample.standardized = data.standardized;
  sample.values.resize(n, data.values.cols());
  sample.row_ids.reserve(rows.size());
  sample.country.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    sample.values.row(i) = data.values.row(r);
    sample.row_ids.push_back(data.row_ids[static_cast<std::size_t>(r)]);
    sample.country.push_back(data.country[static_cast<std::size_t>(r)]);
  }

  const auto v_col = static_cast<Eigen::Index>(sample.require_column(curve.variable));
  const auto y_col = static_cast<Eigen::Index>(sample.require_column(outcome));
  const Eigen::VectorXd v = sample.values.col(v_col);
  const Eigen::VectorXd y = sample.values.col(y_col);

  std::vector<double> out(curve.specs.size(), kNaN);
  for (std::size_t k = 0; k < curve.specs.size(); ++k) {
    if (std::isnan(curve.estimates[k])) continue;
    sample.values.col(y_col) = y - curve.estimates[k] * v;
    try {
      const DesignMatrix design = build_design(
          sample, outcome, curve.specs[k].covariates(catalog));
      const FitResult fit = fit_at(curve.specs[k].estimator, design);
      out[k] = fit.coefficient(curve.variable);
    } catch (const ValidationError&) {
    } catch (const NumericError&) {
    }
  }
  return out;
}

CounterfactualTensor bootstrap_counterfactual(const CurveResult& curve,
                                              const Catalog& catalog,
                                              const CovariateTable& data,
                                              const std::string& outcome,
                                              std::size_t replications,
                                              std::uint64_t seed, int threads) {
  CounterfactualTensor tensor;
  tensor.replications = replications;
  tensor.n_specs = curve.specs.size();
  tensor.seed = seed;
  tensor.values.assign(replications * tensor.n_specs, kNaN);
  tensor.replication_complete.assign(replications, 0);
  if (replications == 0) return tensor;

  const std::size_t n = data.row_ids.size();
  parallel_for(replications, threads, [&](std::size_t rep) {
    Rng rng = Rng::stream(seed, rep);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i)
      rows[i] = static_cast<std::size_t>(rng.below(n));
    const auto estimates =
        counterfactual_estimates(curve, catalog, data, outcome, rows);
    bool complete = true;
    for (std::size_t k = 0; k < tensor.n_specs; ++k) {
      tensor.values[rep * tensor.n_specs + k] = estimates[k];
      if (!std::isnan(curve.estimates[k]) && std::isnan(estimates[k]))
        complete = false;
    }
    tensor.replication_complete[rep] = complete ? 1 : 0;
  });
  return tensor;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - std::floor(h);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::string to_string(TestStatus s) {
  switch (s) {
    case TestStatus::pass: return "pass";
    case TestStatus::fail: return "fail";
    case TestStatus::not_evaluated: return "not_evaluated";
  }
  return "?";
}

TestOutcome test1_sign(const CurveResult& curve) {
  std::size_t positive = 0, negative = 0;
  for (std::size_t k : curve.valid_idx) {
    if (curve.estimates[k] > 0.0) ++positive;
    if (curve.estimates[k] < 0.0) ++negative;
  }
  const std::size_t n = curve.n_valid();
  std::size_t dominant = 0;
  if (curve.dominant_sign > 0)
    dominant = positive;
  else if (curve.dominant_sign < 0)
    dominant = negative;
  else
    dominant = std::max(positive, negative);

  TestOutcome out;
  out.share = n > 0 ? static_cast<double>(dominant) / static_cast<double>(n) : 0.0;
  out.status = out.share >= kPassThreshold ? TestStatus::pass : TestStatus::fail;
  return out;
}

TestOutcome test2_median(const CurveResult& curve,
                         const CounterfactualTensor& tensor) {
  TestOutcome out;
  if (tensor.replications == 0) return out; // not evaluated

  const double observed = std::abs(curve.median_estimate);
  std::size_t used = 0, exceeded = 0;
  std::vector<double> rep_values;
  for (std::size_t rep = 0; rep < tensor.replications; ++rep) {
    rep_values.clear();
    for (std::size_t k : curve.valid_idx) {
      const double v = tensor.at(rep, k);
      if (!std::isnan(v)) rep_values.push_back(v);
    }
    if (rep_values.empty()) continue;
    ++used;
    if (observed > std::abs(median_of(rep_values))) ++exceeded;
  }
  if (used == 0) return out;
  out.share = static_cast<double>(exceeded) / static_cast<double>(used);
  out.status = out.share >= kPassThreshold ? TestStatus::pass : TestStatus::fail;
  return out;
}

Test3Outcome test3_ranked_band(const CurveResult& curve,
                               const CounterfactualTensor& tensor) {
  Test3Outcome out;
  if (tensor.replications == 0) return out; // not evaluated

  std::vector<double> observed;
  for (std::size_t k : curve.valid_idx) observed.push_back(curve.estimates[k]);
  std::sort(observed.begin(), observed.end());
  const std::size_t n_ranks = observed.size();

  // Rank alignment needs a full curve per replication, so replications with
  // any failed cell are left out (counted, never imputed).
  std::vector<std::size_t> complete;
  for (std::size_t rep = 0; rep < tensor.replications; ++rep)
    if (tensor.replication_complete[rep]) complete.push_back(rep);
  out.complete_replications = complete.size();
  if (complete.empty()) {
    out.outcome.status = TestStatus::not_evaluated;
    return out;
  }

  std::vector<std::vector<double>> sorted_reps(complete.size());
  for (std::size_t i = 0; i < complete.size(); ++i) {
    auto& values = sorted_reps[i];
    values.reserve(n_ranks);
    for (std::size_t k : curve.valid_idx)
      values.push_back(tensor.at(complete[i], k));
    std::sort(values.begin(), values.end());
  }

  std::size_t outside = 0;
  std::vector<double> at_rank(complete.size());
  for (std::size_t rank = 0; rank < n_ranks; ++rank) {
    for (std::size_t i = 0; i < complete.size(); ++i)
      at_rank[i] = sorted_reps[i][rank];
    std::sort(at_rank.begin(), at_rank.end());
    BandPoint point;
    point.rank = rank + 1;
    point.observed = observed[rank];
    point.lo = quantile_type7(at_rank, 0.025);
    point.hi = quantile_type7(at_rank, 0.975);
    if (point.observed < point.lo || point.observed > point.hi) ++outside;
    out.band.push_back(point);
  }
  out.outcome.share =
      n_ranks > 0 ? static_cast<double>(outside) / static_cast<double>(n_ranks)
                  : 0.0;
  out.outcome.status =
      out.outcome.share >= kPassThreshold ? TestStatus::pass : TestStatus::fail;
  return out;
}

std::string to_string(RobustLabel label) {
  switch (label) {
    case RobustLabel::robust_all: return "robust_all";
    case RobustLabel::robust: return "robust";
    case RobustLabel::not_robust: return "not_robust";
    case RobustLabel::not_evaluated: return "not_evaluated";
  }
  return "?";
}

VariableSummary summarize(const VariableMeta& meta, const CurveResult& curve,
                          const TestOutcome& t1, const TestOutcome& t2,
                          const Test3Outcome& t3) {
  VariableSummary summary;
  summary.meta = meta;
  summary.estimator = curve.estimator;
  summary.n_specs = curve.specs.size();
  summary.n_invalid = curve.invalid.size();
  summary.median_estimate = curve.median_estimate;
  summary.dominant_sign = curve.dominant_sign;
  summary.test1 = t1;
  summary.test2 = t2;
  summary.test3 = t3.outcome;

  if (t2.status == TestStatus::not_evaluated ||
      t3.outcome.status == TestStatus::not_evaluated) {
    summary.label = RobustLabel::not_evaluated;
  } else if (t1.status == TestStatus::pass && t2.status == TestStatus::pass) {
    summary.label = t3.outcome.status == TestStatus::pass
                        ? RobustLabel::robust_all
                        : RobustLabel::robust;
  } else {
    summary.label = RobustLabel::not_robust;
  }
  return summary;
}

} // namespace segsca
