/* C interface to the segsca engine: gridded segregation indices and
 * specification-curve analysis with counterfactual bootstrap inference.
 *
 * Conventions:
 *   - Every fallible call returns a status code (SEGSCA_OK on success) and
 *     leaves a thread-local message readable via segsca_last_error().
 *   - Handles are opaque; free them with the matching *_free function.
 *   - Strings returned through accessor structs stay owned by their handle
 *     and are valid until the handle is freed.
 *   - Option structs must be initialised with their *_init function before
 *     use so new fields keep working defaults.
 */
#ifndef SEGSCA_H
#define SEGSCA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SEGSCA_OK 0
#define SEGSCA_ERR_VALIDATION 1 /* bad inputs, schema violations, degenerate data */
#define SEGSCA_ERR_NUMERIC 2    /* rank deficiency, out-of-range results */
#define SEGSCA_ERR_IO 3         /* unreadable or unwritable files */
#define SEGSCA_ERR_INTERNAL 4   /* anything else; report it */

/* Message for the most recent failure on this thread ("" when none). */
const char* segsca_last_error(void);

/* Library name and version, e.g. "segsca 1.0.0". */
const char* segsca_version(void);

/* ---- population grids ---------------------------------------------------- */

typedef struct segsca_grid segsca_grid;

/* Reads a grid CSV (fua_id, fua_name, country, x_km, y_km, pop_* columns,
 * optional male/female/core_flag). */
int segsca_grid_read(const char* csv_path, segsca_grid** out);

int segsca_grid_write(const segsca_grid* grid, const char* csv_path);

size_t segsca_grid_area_count(const segsca_grid* grid);

void segsca_grid_free(segsca_grid* grid);

typedef struct {
  size_t n_areas;
  size_t n_countries;
  int nx;
  int ny;
  double cell_km;
  double total_population;
  double focal_share;
  const char* pattern; /* uniform | radial-gradient | two-block | random */
  double core_radius_km; /* <= 0: no core flags */
} segsca_synth_grid_opts;

void segsca_synth_grid_opts_init(segsca_synth_grid_opts* opts);

int segsca_grid_synth(const segsca_synth_grid_opts* opts, uint64_t seed,
                      segsca_grid** out);

/* ---- segregation indices -------------------------------------------------- */

typedef struct segsca_result segsca_result;

typedef struct {
  /* Comma list of index kinds: spatial_D, spatial_P, aspatial_D, aspatial_P,
   * dispersion. */
  const char* kinds;
  const double* radii_km; /* used by spatial kinds */
  size_t n_radii;
  /* Semicolon-separated partitions, each a comma list of focal group names;
   * NULL means one partition with the last group column as focal side. */
  const char* partitions;
  int filter_outliers;
  int core; /* also score the core subarea of every FUA */
  int threads;
} segsca_indices_opts;

void segsca_indices_opts_init(segsca_indices_opts* opts);

int segsca_indices_run(const segsca_grid* grid, const segsca_indices_opts* opts,
                       segsca_result** out);

typedef struct {
  const char* fua_id;
  const char* country;
  const char* index;
  double radius_km; /* NaN when the index has no radius */
  const char* partition;
  const char* filters;
  double value;
} segsca_score_view;

size_t segsca_result_score_count(const segsca_result* result);
int segsca_result_score(const segsca_result* result, size_t i,
                        segsca_score_view* out);
int segsca_result_write_scores(const segsca_result* result, const char* csv_path);

/* Cells dropped by the outlier filter, as (fua_id, partition, cell_id). */
size_t segsca_result_removed_count(const segsca_result* result);
int segsca_result_write_removed(const segsca_result* result, const char* csv_path);

/* Areas too small for the filter, as (fua_id, partition). */
size_t segsca_result_skipped_count(const segsca_result* result);
int segsca_result_write_skipped(const segsca_result* result, const char* csv_path);

void segsca_result_free(segsca_result* result);

/* ---- specification-curve analysis ------------------------------------------ */

typedef struct {
  const char* estimator; /* fixed_effects | random_intercept (alias multilevel) */
  int min_focal;
  int max_focal;
  int min_country; /* random_intercept only */
  int max_country;
  const char* focal; /* comma list of focal variables; NULL = every candidate */
  uint64_t replications;
  uint64_t seed;
  const char* missing; /* mean | drop */
  int standardize;     /* z-score covariates before fitting */
  int threads;
} segsca_sca_opts;

void segsca_sca_opts_init(segsca_sca_opts* opts);

/* Runs the full analysis and writes per-variable JSON + plot CSVs, the
 * robustness table, and audit files into output_dir. On success *info_json
 * (if non-NULL) receives a JSON summary: counts, written files, and
 * per-variable labels; free it with segsca_string_free. */
int segsca_sca_run(const char* catalog_csv, const char* covariates_csv,
                   const segsca_sca_opts* opts, const char* output_dir,
                   char** info_json);

/* Number of specifications the catalog + limits enumerate to. */
int segsca_spec_count(const char* catalog_csv, const segsca_sca_opts* opts,
                      uint64_t* count);

void segsca_string_free(char* s);

/* ---- synthetic analysis data ------------------------------------------------ */

typedef struct {
  size_t n_rows;      /* ignored when rows come from a grid */
  size_t n_countries; /* ignored when rows come from a grid */
  size_t n_candidates;
  size_t n_subgroups;
  size_t n_country_candidates;
  size_t n_country_subgroups;
  size_t n_base_controls;
  const char* outcome;
  /* Comma list of name=value true effects, e.g. "x1=1.0,z2=-0.5"; NULL = all
   * zero (null-true data). */
  const char* effects;
  double noise_sd;
  double country_sd;
} segsca_synth_sca_opts;

void segsca_synth_sca_opts_init(segsca_synth_sca_opts* opts);

/* Writes a covariate CSV and matching catalog CSV. When grid is non-NULL the
 * rows are its areas (fua_id + country taken from the grid). */
int segsca_synth_sca_write(const segsca_grid* grid,
                           const segsca_synth_sca_opts* opts, uint64_t seed,
                           const char* covariates_csv, const char* catalog_csv);

/* ---- dasymetric interpolation ----------------------------------------------- */

/* zones: zone_id + one column per population group. members: zone_id,
 * fine_cell_id, weight. mapping: fine_cell_id, target_cell_id. Writes
 * target_cell_id + group columns with per-group mass preserved. */
int segsca_interpolate(const char* zones_csv, const char* members_csv,
                       const char* mapping_csv, const char* out_csv);

/* ---- run manifests ------------------------------------------------------------ */

/* Hex SHA-256 of a file; out must hold at least 65 bytes. */
int segsca_file_sha256(const char* path, char* out_hex65);

/* Writes output_dir/manifest.json listing the command, the config digest,
 * input digests, the master seed (NULL pointer = none), tool version,
 * wall-clock seconds, a free-form details JSON object (NULL = {}), and a
 * digest for every named output file (paths relative to output_dir). */
int segsca_manifest_write(const char* output_dir, const char* command,
                          const char* config_path, const char* const* inputs,
                          size_t n_inputs, const uint64_t* master_seed,
                          const char* details_json, const char* const* outputs,
                          size_t n_outputs, double wall_clock_seconds);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEGSCA_H */
