#include "segsca/segsca.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "csv.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "indices.hpp"
#include "runner.hpp"
#include "sca.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

// Runs fn, translating exceptions into status codes + the thread-local
// message. fn returns a status itself so argument checks can reuse it.
template <class F>
int guarded(F&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const segsca::ValidationError& e) {
    set_error(e.what());
    return SEGSCA_ERR_VALIDATION;
  } catch (const segsca::IoError& e) {
    set_error(e.what());
    return SEGSCA_ERR_IO;
  } catch (const segsca::NumericError& e) {
    set_error(e.what());
    return SEGSCA_ERR_NUMERIC;
  } catch (const std::exception& e) {
    set_error(e.what());
    return SEGSCA_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown error");
    return SEGSCA_ERR_INTERNAL;
  }
}

int require(bool ok, const char* what) {
  if (!ok) {
    set_error(std::string("invalid argument: ") + what);
    return SEGSCA_ERR_VALIDATION;
  }
  return SEGSCA_OK;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(sep, start);
    if (end == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

} // namespace

struct segsca_grid {
  segsca::GridCollection areas;
};

struct segsca_result {
  segsca::IndicesResult result;
  // Owned string storage for score views (kind and filter labels are
  // computed, not stored on the score itself).
  std::vector<std::string> kind_labels;
  std::vector<std::string> filter_labels;
};

extern "C" {

const char* segsca_last_error(void) { return g_last_error.c_str(); }

const char* segsca_version(void) {
  static const std::string version = segsca::tool_version();
  return version.c_str();
}

int segsca_grid_read(const char* csv_path, segsca_grid** out) {
  return guarded([&] {
    if (int rc = require(csv_path && out, "csv_path and out required")) return rc;
    auto handle = std::make_unique<segsca_grid>();
    handle->areas = segsca::ingest_grid(csv_path);
    *out = handle.release();
    return SEGSCA_OK;
  });
}

int segsca_grid_write(const segsca_grid* grid, const char* csv_path) {
  return guarded([&] {
    if (int rc = require(grid && csv_path, "grid and csv_path required")) return rc;
    segsca::write_grid(grid->areas, csv_path);
    return SEGSCA_OK;
  });
}

size_t segsca_grid_area_count(const segsca_grid* grid) {
  return grid ? grid->areas.size() : 0;
}

void segsca_grid_free(segsca_grid* grid) { delete grid; }

void segsca_synth_grid_opts_init(segsca_synth_grid_opts* opts) {
  if (!opts) return;
  opts->n_areas = 1;
  opts->n_countries = 1;
  opts->nx = 10;
  opts->ny = 10;
  opts->cell_km = 1.0;
  opts->total_population = 10000.0;
  opts->focal_share = 0.2;
  opts->pattern = "random";
  opts->core_radius_km = 0.0;
}

int segsca_grid_synth(const segsca_synth_grid_opts* opts, uint64_t seed,
                      segsca_grid** out) {
  return guarded([&] {
    if (int rc = require(opts && out, "opts and out required")) return rc;
    segsca::SynthGridConfig config;
    config.n_areas = opts->n_areas;
    config.n_countries = opts->n_countries;
    config.nx = opts->nx;
    config.ny = opts->ny;
    config.cell_km = opts->cell_km;
    config.total_population = opts->total_population;
    config.focal_share = opts->focal_share;
    if (opts->pattern)
      config.pattern = segsca::synth_pattern_from_string(opts->pattern);
    config.core_radius_km = opts->core_radius_km;
    auto handle = std::make_unique<segsca_grid>();
    handle->areas = segsca::generate_synthetic_grids(config, seed);
    *out = handle.release();
    return SEGSCA_OK;
  });
}

void segsca_indices_opts_init(segsca_indices_opts* opts) {
  if (!opts) return;
  opts->kinds = "spatial_D";
  opts->radii_km = nullptr;
  opts->n_radii = 0;
  opts->partitions = nullptr;
  opts->filter_outliers = 0;
  opts->core = 0;
  opts->threads = 1;
}

int segsca_indices_run(const segsca_grid* grid, const segsca_indices_opts* opts,
                       segsca_result** out) {
  return guarded([&] {
    if (int rc = require(grid && opts && out, "grid, opts and out required"))
      return rc;
    if (int rc = require(opts->kinds && *opts->kinds, "kinds required")) return rc;

    segsca::IndicesRequest request;
    request.kinds.clear();
    for (const auto& name : split(opts->kinds, ','))
      request.kinds.push_back(segsca::index_kind_from_string(name));
    if (opts->n_radii > 0) {
      if (int rc = require(opts->radii_km != nullptr, "radii_km required"))
        return rc;
      request.radii_km.assign(opts->radii_km, opts->radii_km + opts->n_radii);
    }
    if (opts->partitions && *opts->partitions) {
      for (const auto& part : split(opts->partitions, ';'))
        request.partitions.push_back(split(part, ','));
    }
    request.filter_outliers = opts->filter_outliers != 0;
    request.core = opts->core != 0;
    request.threads = opts->threads;

    auto handle = std::make_unique<segsca_result>();
    handle->result = segsca::run_indices(grid->areas, request);
    handle->kind_labels.reserve(handle->result.scores.size());
    handle->filter_labels.reserve(handle->result.scores.size());
    for (const auto& s : handle->result.scores) {
      handle->kind_labels.push_back(segsca::to_string(s.kind));
      handle->filter_labels.push_back(s.filters.label());
    }
    *out = handle.release();
    return SEGSCA_OK;
  });
}

size_t segsca_result_score_count(const segsca_result* result) {
  return result ? result->result.scores.size() : 0;
}

int segsca_result_score(const segsca_result* result, size_t i,
                        segsca_score_view* out) {
  return guarded([&] {
    if (int rc = require(result && out, "result and out required")) return rc;
    if (int rc = require(i < result->result.scores.size(), "index out of range"))
      return rc;
    const auto& s = result->result.scores[i];
    out->fua_id = s.fua_id.c_str();
    out->country = s.country.c_str();
    out->index = result->kind_labels[i].c_str();
    out->radius_km =
        s.radius_km ? *s.radius_km : std::numeric_limits<double>::quiet_NaN();
    out->partition = s.partition.c_str();
    out->filters = result->filter_labels[i].c_str();
    out->value = s.value;
    return SEGSCA_OK;
  });
}

int segsca_result_write_scores(const segsca_result* result, const char* csv_path) {
  return guarded([&] {
    if (int rc = require(result && csv_path, "result and csv_path required"))
      return rc;
    segsca::write_scores_csv(result->result.scores, csv_path);
    return SEGSCA_OK;
  });
}

size_t segsca_result_removed_count(const segsca_result* result) {
  return result ? result->result.removed_cells.size() : 0;
}

int segsca_result_write_removed(const segsca_result* result, const char* csv_path) {
  return guarded([&] {
    if (int rc = require(result && csv_path, "result and csv_path required"))
      return rc;
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : result->result.removed_cells)
      rows.push_back({r[0], r[1], r[2]});
    segsca::write_csv(csv_path, {"fua_id", "partition", "cell_id"}, rows);
    return SEGSCA_OK;
  });
}

size_t segsca_result_skipped_count(const segsca_result* result) {
  return result ? result->result.filter_skipped.size() : 0;
}

int segsca_result_write_skipped(const segsca_result* result, const char* csv_path) {
  return guarded([&] {
    if (int rc = require(result && csv_path, "result and csv_path required"))
      return rc;
    std::vector<std::vector<std::string>> rows;
    for (const auto& [fua, partition] : result->result.filter_skipped)
      rows.push_back({fua, partition});
    segsca::write_csv(csv_path, {"fua_id", "partition"}, rows);
    return SEGSCA_OK;
  });
}

void segsca_result_free(segsca_result* result) { delete result; }

void segsca_sca_opts_init(segsca_sca_opts* opts) {
  if (!opts) return;
  opts->estimator = "fixed_effects";
  opts->min_focal = 1;
  opts->max_focal = 4;
  opts->min_country = 0;
  opts->max_country = 3;
  opts->focal = nullptr;
  opts->replications = 500;
  opts->seed = 0;
  opts->missing = "mean";
  opts->standardize = 1;
  opts->threads = 1;
}

namespace {

segsca::ScaRequest to_request(const segsca_sca_opts* opts) {
  segsca::ScaRequest request;
  if (opts->estimator)
    request.estimator = segsca::estimator_from_string(opts->estimator);
  request.limits.min_focal = opts->min_focal;
  request.limits.max_focal = opts->max_focal;
  request.limits.min_country = opts->min_country;
  request.limits.max_country = opts->max_country;
  if (opts->focal && *opts->focal)
    request.focal_variables = split(opts->focal, ',');
  request.replications = opts->replications;
  request.seed = opts->seed;
  if (opts->missing)
    request.missing = segsca::missing_policy_from_string(opts->missing);
  request.standardize = opts->standardize != 0;
  request.threads = opts->threads;
  return request;
}

} // namespace

int segsca_sca_run(const char* catalog_csv, const char* covariates_csv,
                   const segsca_sca_opts* opts, const char* output_dir,
                   char** info_json) {
  return guarded([&] {
    if (int rc = require(catalog_csv && covariates_csv && opts && output_dir,
                         "catalog_csv, covariates_csv, opts and output_dir "
                         "required"))
      return rc;
    const auto catalog = segsca::Catalog::from_csv(catalog_csv);
    auto data = segsca::CovariateTable::from_csv(covariates_csv);
    const auto request = to_request(opts);
    const auto run = segsca::run_sca(catalog, std::move(data), request, output_dir);

    if (info_json) {
      nlohmann::ordered_json j;
      j["estimator"] = segsca::to_string(request.estimator);
      j["n_specs_enumerated"] = run.n_specs_enumerated;
      j["rows_used"] = run.rows_used;
      j["dropped_rows"] = run.missing_report.dropped_rows;
      j["imputed_cells"] = run.missing_report.imputed.size();
      nlohmann::ordered_json files = nlohmann::ordered_json::array();
      for (const auto& f : run.files) files.push_back(f.generic_string());
      j["files"] = std::move(files);
      nlohmann::ordered_json vars = nlohmann::ordered_json::object();
      for (const auto& s : run.summaries) {
        vars[s.meta.name] = {{"n_specs", s.n_specs},
                             {"n_invalid", s.n_invalid},
                             {"label", segsca::to_string(s.label)}};
      }
      j["variables"] = std::move(vars);
      *info_json = copy_string(j.dump(2));
    }
    return SEGSCA_OK;
  });
}

int segsca_spec_count(const char* catalog_csv, const segsca_sca_opts* opts,
                      uint64_t* count) {
  return guarded([&] {
    if (int rc = require(catalog_csv && opts && count,
                         "catalog_csv, opts and count required"))
      return rc;
    const auto catalog = segsca::Catalog::from_csv(catalog_csv);
    const auto request = to_request(opts);
    *count = segsca::enumerate_specs(catalog, request.limits, request.estimator)
                 .size();
    return SEGSCA_OK;
  });
}

void segsca_string_free(char* s) { delete[] s; }

void segsca_synth_sca_opts_init(segsca_synth_sca_opts* opts) {
  if (!opts) return;
  opts->n_rows = 717;
  opts->n_countries = 30;
  opts->n_candidates = 8;
  opts->n_subgroups = 4;
  opts->n_country_candidates = 0;
  opts->n_country_subgroups = 0;
  opts->n_base_controls = 1;
  opts->outcome = "seg_d";
  opts->effects = nullptr;
  opts->noise_sd = 1.0;
  opts->country_sd = 0.5;
}

int segsca_synth_sca_write(const segsca_grid* grid,
                           const segsca_synth_sca_opts* opts, uint64_t seed,
                           const char* covariates_csv, const char* catalog_csv) {
  return guarded([&] {
    if (int rc = require(opts && covariates_csv && catalog_csv,
                         "opts, covariates_csv and catalog_csv required"))
      return rc;
    segsca::SynthScaConfig config;
    config.n_rows = opts->n_rows;
    config.n_countries = opts->n_countries;
    config.n_candidates = opts->n_candidates;
    config.n_subgroups = opts->n_subgroups;
    config.n_country_candidates = opts->n_country_candidates;
    config.n_country_subgroups = opts->n_country_subgroups;
    config.n_base_controls = opts->n_base_controls;
    if (opts->outcome) config.outcome = opts->outcome;
    if (opts->effects && *opts->effects) {
      for (const auto& item : split(opts->effects, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
          throw segsca::ValidationError("effect '" + item +
                                        "' is not name=value");
        config.effects.emplace_back(
            item.substr(0, eq),
            segsca::parse_double(item.substr(eq + 1), "effect '" + item + "'"));
      }
    }
    config.noise_sd = opts->noise_sd;
    config.country_sd = opts->country_sd;

    segsca::SynthSca synth;
    if (grid) {
      std::vector<std::string> row_ids, countries;
      for (const auto& area : grid->areas) {
        row_ids.push_back(area.fua_id);
        countries.push_back(area.country);
      }
      synth = segsca::generate_synthetic_sca(config, seed, &row_ids, &countries);
    } else {
      synth = segsca::generate_synthetic_sca(config, seed);
    }
    segsca::write_covariates_csv(synth.table, covariates_csv);
    synth.catalog.to_csv(catalog_csv);
    return SEGSCA_OK;
  });
}

int segsca_interpolate(const char* zones_csv, const char* members_csv,
                       const char* mapping_csv, const char* out_csv) {
  return guarded([&] {
    if (int rc = require(zones_csv && members_csv && mapping_csv && out_csv,
                         "zones_csv, members_csv, mapping_csv and out_csv "
                         "required"))
      return rc;
    segsca::run_interpolate(zones_csv, members_csv, mapping_csv, out_csv);
    return SEGSCA_OK;
  });
}

int segsca_file_sha256(const char* path, char* out_hex65) {
  return guarded([&] {
    if (int rc = require(path && out_hex65, "path and out buffer required"))
      return rc;
    const std::string hex = segsca::Sha256::of_file(path);
    std::memcpy(out_hex65, hex.c_str(), hex.size() + 1);
    return SEGSCA_OK;
  });
}

int segsca_manifest_write(const char* output_dir, const char* command,
                          const char* config_path, const char* const* inputs,
                          size_t n_inputs, const uint64_t* master_seed,
                          const char* details_json, const char* const* outputs,
                          size_t n_outputs, double wall_clock_seconds) {
  return guarded([&] {
    if (int rc = require(output_dir && command, "output_dir and command required"))
      return rc;
    if (int rc = require(n_inputs == 0 || inputs, "inputs required")) return rc;
    if (int rc = require(n_outputs == 0 || outputs, "outputs required")) return rc;

    segsca::RunManifest manifest;
    manifest.command = command;
    manifest.config_digest =
        config_path ? segsca::Sha256::of_file(config_path) : "-";
    for (size_t i = 0; i < n_inputs; ++i) {
      if (int rc = require(inputs[i] != nullptr, "null input path")) return rc;
      manifest.inputs.emplace_back(inputs[i], segsca::Sha256::of_file(inputs[i]));
    }
    if (master_seed) manifest.master_seed = *master_seed;
    manifest.tool_version = segsca::tool_version();
    manifest.wall_clock_seconds = wall_clock_seconds;
    if (details_json && *details_json) {
      manifest.details = nlohmann::ordered_json::parse(details_json, nullptr,
                                                       /*allow_exceptions=*/false);
      if (manifest.details.is_discarded())
        throw segsca::ValidationError("details_json is not valid JSON");
    }
    std::vector<std::filesystem::path> output_paths;
    for (size_t i = 0; i < n_outputs; ++i) {
      if (int rc = require(outputs[i] != nullptr, "null output path")) return rc;
      output_paths.emplace_back(outputs[i]);
    }
    segsca::write_manifest(manifest, output_dir, output_paths);
    return SEGSCA_OK;
  });
}

} // extern "C"
