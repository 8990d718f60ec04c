#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grid.hpp"
#include "indices.hpp"
#include "sca.hpp"

namespace segsca {

std::string tool_version();

// -- batch index computation --------------------------------------------------

struct IndicesRequest {
  std::vector<IndexKind> kinds = {IndexKind::spatial_d};
  std::vector<double> radii_km = {1.0};
  // Each entry is one focal-group set defining a binary partition. Empty
  // means a single default partition: the last group column.
  std::vector<std::vector<std::string>> partitions;
  bool filter_outliers = false;
  bool core = false; // additionally score the core as its own area
  int threads = 1;
};

struct IndicesResult {
  std::vector<SegScore> scores;
  // (fua_id, partition, cell_id) per cell dropped by the outlier filter.
  std::vector<std::array<std::string, 3>> removed_cells;
  // (fua_id, partition) where the filter was skipped (< 5 cells).
  std::vector<std::pair<std::string, std::string>> filter_skipped;
};

IndicesResult run_indices(const GridCollection& areas,
                          const IndicesRequest& request);

void write_scores_csv(const std::vector<SegScore>& scores,
                      const std::filesystem::path& path);

// -- batch specification-curve analysis ----------------------------------------

struct ScaRequest {
  Estimator estimator = Estimator::fixed_effects;
  SpecLimits limits;
  std::vector<std::string> focal_variables; // empty: every fua-level candidate
  std::size_t replications = 500;
  std::uint64_t seed = 0;
  MissingPolicy missing = MissingPolicy::mean_impute;
  bool standardize = true;
  int threads = 1;
};

struct ScaRunResult {
  std::vector<VariableSummary> summaries;
  std::size_t n_specs_enumerated = 0;
  std::size_t rows_used = 0;
  MissingReport missing_report;
  // Output files written under output_dir, in write order, relative paths.
  std::vector<std::filesystem::path> files;
};

// Runs the full analysis and writes, per focal variable, a JSON result and a
// plot-data CSV (rank, observed, band_lo, band_hi), plus the flat robustness
// table and audit files for imputed cells and invalid specifications.
ScaRunResult run_sca(const Catalog& catalog, CovariateTable data,
                     const ScaRequest& request,
                     const std::filesystem::path& output_dir);

void write_covariates_csv(const CovariateTable& table,
                          const std::filesystem::path& path);

// -- synthetic data -----------------------------------------------------------

struct SynthGridConfig {
  std::size_t n_areas = 1;
  std::size_t n_countries = 1;
  int nx = 10;
  int ny = 10;
  double cell_km = 1.0;
  double total_population = 10000.0;
  double focal_share = 0.2;
  SynthPattern pattern = SynthPattern::random;
  double core_radius_km = 0.0;
};

GridCollection generate_synthetic_grids(const SynthGridConfig& config,
                                        std::uint64_t seed);

struct SynthScaConfig {
  std::size_t n_rows = 717;
  std::size_t n_countries = 30;
  std::size_t n_candidates = 8;
  std::size_t n_subgroups = 4; // candidates assigned round-robin
  std::size_t n_country_candidates = 0;
  std::size_t n_country_subgroups = 0;
  std::size_t n_base_controls = 1;
  std::string outcome = "seg_d";
  // Standardized true effects by column name ("x1"...); absent means 0.
  std::vector<std::pair<std::string, double>> effects;
  double noise_sd = 1.0;
  double country_sd = 0.5; // sd of the random country intercept
};

struct SynthSca {
  Catalog catalog;
  CovariateTable table;
};

// Draws covariates ~ N(0,1) (country candidates constant within country) and
// the outcome from the configured linear effects plus a country intercept and
// noise. When row_ids/countries are given (e.g. from a generated grid) they
// define the rows; otherwise rows are F0001.. with countries round-robin.
SynthSca generate_synthetic_sca(const SynthScaConfig& config, std::uint64_t seed,
                                const std::vector<std::string>* row_ids = nullptr,
                                const std::vector<std::string>* countries = nullptr);

// -- dasymetric interpolation from files ---------------------------------------

// zones CSV: zone_id + one column per group. members CSV: zone_id,
// fine_cell_id, weight. mapping CSV: fine_cell_id, target_cell_id. Writes
// target_cell_id + group columns, sorted by target cell id.
void run_interpolate(const std::filesystem::path& zones_csv,
                     const std::filesystem::path& members_csv,
                     const std::filesystem::path& mapping_csv,
                     const std::filesystem::path& out_csv);

// -- run manifest ---------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_digest = "-"; // "-" when no config file was given
  std::vector<std::pair<std::string, std::string>> inputs; // path, sha256
  std::optional<std::uint64_t> master_seed;
  std::string tool_version;
  double wall_clock_seconds = 0.0;
  nlohmann::ordered_json details; // subcommand extras (spec counts, ...)
};

// Digests every output (paths relative to output_dir) and writes
// manifest.json into output_dir.
void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& output_dir,
                    const std::vector<std::filesystem::path>& outputs);

} // namespace segsca
