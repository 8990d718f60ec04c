#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linmod.hpp"

namespace segsca {

enum class VarLevel { fua, country };
enum class VarRole { outcome, base_control, candidate, country_candidate };

std::string to_string(VarLevel level);
std::string to_string(VarRole role);
VarLevel var_level_from_string(const std::string& s);
VarRole var_role_from_string(const std::string& s);

struct VariableMeta {
  std::string name;
  VarLevel level = VarLevel::fua;
  std::string group;
  std::string subgroup;
  VarRole role = VarRole::candidate;

  // Subgroups are scoped to their group; exclusion keys use both.
  std::string subgroup_key() const { return group + "/" + subgroup; }
};

struct Catalog {
  std::vector<VariableMeta> vars;

  void validate() const;
  const VariableMeta* find(const std::string& name) const;
  std::vector<std::string> base_controls() const;
  std::vector<VariableMeta> candidates() const;
  std::vector<VariableMeta> country_candidates() const;
  std::optional<std::string> outcome_name() const;

  static Catalog from_csv(const std::filesystem::path& path);
  void to_csv(const std::filesystem::path& path) const;
};

enum class Estimator { fixed_effects, random_intercept };
std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

struct SpecLimits {
  int min_focal = 1;
  int max_focal = 4;
  int min_country = 0; // random-intercept specs only
  int max_country = 3;

  void validate() const;
};

// One model specification: the base controls plus a focal-candidate subset
// (at most one per subgroup) and, for random-intercept models, a
// country-candidate subset under the same rule.
struct Specification {
  std::string spec_id;
  Estimator estimator = Estimator::fixed_effects;
  std::vector<std::string> focal;   // catalog order
  std::vector<std::string> country; // catalog order

  bool contains(const std::string& name) const;
  std::vector<std::string> covariates(const Catalog& catalog) const;
};

std::string spec_id_of(Estimator estimator,
                       const std::vector<std::string>& focal,
                       const std::vector<std::string>& country);

// All specifications in canonical order: focal subsets by size then
// lexicographic candidate position, crossed (for random intercept) with
// country subsets in the same order.
std::vector<Specification> enumerate_specs(const Catalog& catalog,
                                           const SpecLimits& limits,
                                           Estimator estimator);

// -- covariate table ---------------------------------------------------------

struct CovariateTable {
  std::vector<std::string> row_ids;
  std::vector<std::string> country;
  std::vector<std::string> columns;
  Eigen::MatrixXd values; // n x columns, NaN marks missing
  bool standardized = false;

  std::optional<std::size_t> column_index(const std::string& name) const;
  std::size_t require_column(const std::string& name) const;
  CovariateTable select_columns(const std::vector<std::string>& names) const;

  static CovariateTable from_csv(const std::filesystem::path& path);
};

enum class MissingPolicy { mean_impute, drop_rows };
MissingPolicy missing_policy_from_string(const std::string& s);

struct ImputedCell {
  std::string row_id;
  std::string column;
  double value = 0.0;
};

struct MissingReport {
  std::vector<ImputedCell> imputed;
  std::size_t dropped_rows = 0;
};

MissingReport handle_missing(CovariateTable& table, MissingPolicy policy);

// Z-scores every listed column in place (sample sd over all rows).
void standardize_table(CovariateTable& table,
                       const std::vector<std::string>& column_names);

DesignMatrix build_design(const CovariateTable& table, const std::string& outcome,
                          const std::vector<std::string>& covariates);

// -- specification curve -----------------------------------------------------

struct CurveResult {
  std::string variable;
  Estimator estimator = Estimator::fixed_effects;
  std::vector<Specification> specs;  // specs containing the variable
  std::vector<double> estimates;     // aligned; NaN for invalid specs
  std::vector<std::pair<std::size_t, std::string>> invalid; // index, reason
  std::vector<std::size_t> valid_idx;
  double median_estimate = 0.0; // over valid specs; NaN when none
  int dominant_sign = 0;        // sign of the median estimate

  std::size_t n_valid() const { return valid_idx.size(); }
};

CurveResult run_curve(const std::vector<Specification>& all_specs,
                      const Catalog& catalog, const CovariateTable& data,
                      const std::string& outcome, const std::string& variable,
                      int threads);

// Re-estimates every valid spec of the curve on the given row sample with
// the outcome replaced by y - b_hat_k * v (per spec k). Aligned with
// curve.specs; NaN where the spec is invalid or the resampled fit fails.
std::vector<double> counterfactual_estimates(const CurveResult& curve,
                                             const Catalog& catalog,
                                             const CovariateTable& data,
                                             const std::string& outcome,
                                             std::span<const std::size_t> rows);

struct CounterfactualTensor {
  std::size_t replications = 0;
  std::size_t n_specs = 0;      // aligned with curve.specs
  std::uint64_t seed = 0;
  std::vector<double> values;   // replication-major
  std::vector<std::uint8_t> replication_complete;

  double at(std::size_t rep, std::size_t spec) const {
    return values[rep * n_specs + spec];
  }
};

// One shared row resample (size n, with replacement) per replication, used
// for every spec; replication r draws from its own seed stream derived from
// (seed, r), so the tensor is identical for any worker count.
CounterfactualTensor bootstrap_counterfactual(const CurveResult& curve,
                                              const Catalog& catalog,
                                              const CovariateTable& data,
                                              const std::string& outcome,
                                              std::size_t replications,
                                              std::uint64_t seed, int threads);

// -- robustness tests --------------------------------------------------------

enum class TestStatus { pass, fail, not_evaluated };
std::string to_string(TestStatus s);

struct TestOutcome {
  TestStatus status = TestStatus::not_evaluated;
  double share = 0.0; // achieved share / percentile
};

// Share of valid estimates whose sign matches the dominant (median) sign;
// zero estimates count against both signs. Pass at >= 95%.
TestOutcome test1_sign(const CurveResult& curve);

// Share of replications whose counterfactual median is less extreme (in
// absolute value) than the observed median. Pass at >= 95%.
TestOutcome test2_median(const CurveResult& curve,
                         const CounterfactualTensor& tensor);

struct BandPoint {
  std::size_t rank = 0; // 1-based
  double observed = 0.0;
  double lo = 0.0; // 2.5% quantile across replications at this rank
  double hi = 0.0; // 97.5% quantile
};

struct Test3Outcome {
  TestOutcome outcome;
  std::vector<BandPoint> band;
  std::size_t complete_replications = 0;
};

// Rank-wise band: sort each replication's estimates, take per-rank quantiles
// over complete replications, and count the ranks where the sorted observed
// curve falls outside the band. Pass at >= 95% of ranks.
Test3Outcome test3_ranked_band(const CurveResult& curve,
                               const CounterfactualTensor& tensor);

enum class RobustLabel { robust_all, robust, not_robust, not_evaluated };
std::string to_string(RobustLabel label);

struct VariableSummary {
  VariableMeta meta;
  Estimator estimator = Estimator::fixed_effects;
  std::size_t n_specs = 0;
  std::size_t n_invalid = 0;
  double median_estimate = 0.0;
  int dominant_sign = 0;
  TestOutcome test1;
  TestOutcome test2;
  TestOutcome test3;
  RobustLabel label = RobustLabel::not_evaluated;
};

VariableSummary summarize(const VariableMeta& meta, const CurveResult& curve,
                          const TestOutcome& t1, const TestOutcome& t2,
                          const Test3Outcome& t3);

double median_of(std::vector<double> values);
double quantile_type7(const std::vector<double>& sorted, double p);

} // namespace segsca
