#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace segsca {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string zero_pad(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  while (s.size() < width) s.insert(s.begin(), '0');
  return s;
}
} // namespace

std::string tool_version() { return "segsca 1.0.0"; }

// -- indices -------------------------------------------------------------------

namespace {

bool is_spatial(IndexKind kind) {
  return kind == IndexKind::spatial_d || kind == IndexKind::spatial_p;
}

struct AreaRows {
  std::vector<SegScore> scores;
  std::vector<std::array<std::string, 3>> removed_cells;
  std::vector<std::pair<std::string, std::string>> filter_skipped;
};

} // namespace

IndicesResult run_indices(const GridCollection& areas,
                          const IndicesRequest& request) {
  if (areas.empty()) throw ValidationError("no urban areas in input");
  if (request.kinds.empty()) throw ValidationError("no index kinds requested");

  const auto& groups = areas.front().group_names;
  std::vector<GroupScheme> schemes;
  if (request.partitions.empty()) {
    schemes.push_back(GroupScheme::by_focal_names(groups, {groups.back()}));
  } else {
    for (const auto& focal : request.partitions)
      schemes.push_back(GroupScheme::by_focal_names(groups, focal));
  }

  const bool needs_spatial =
      std::any_of(request.kinds.begin(), request.kinds.end(), is_spatial);
  if (needs_spatial) {
    if (request.radii_km.empty())
      throw ValidationError("spatial indices need at least one radius");
    for (double r : request.radii_km) {
      SmoothingSpec spec;
      spec.radius_km = r;
      spec.validate();
    }
  }

  std::vector<AreaRows> slots(areas.size());
  parallel_for(areas.size(), request.threads, [&](std::size_t a) {
    const UrbanArea& raw = areas[a];
    AreaRows& out = slots[a];
    for (const auto& scheme : schemes) {
      Filters filters;
      UrbanArea filtered;
      const UrbanArea* area = &raw;
      if (request.filter_outliers) {
        OutlierFilterResult fr = filter_outlier_cells(raw, scheme);
        if (fr.skipped_small_area) {
          out.filter_skipped.emplace_back(raw.fua_id, scheme.partition_label());
        } else {
          filters.outliers_removed = true;
          for (const auto& id : fr.removed_cell_ids)
            out.removed_cells.push_back({raw.fua_id, scheme.partition_label(), id});
        }
        filtered = std::move(fr.area);
        area = &filtered;
      }

      std::optional<NeighborIndex> index;
      if (needs_spatial && !request.core) index.emplace(*area);

      std::optional<std::pair<SegScore, SegScore>> aspatial;
      auto aspatial_pair = [&]() -> const std::pair<SegScore, SegScore>& {
        if (!aspatial) aspatial = aspatial_indices(*area, scheme);
        return *aspatial;
      };

      for (IndexKind kind : request.kinds) {
        switch (kind) {
          case IndexKind::dispersion: {
            const DispersionScore d = population_dispersion(*area);
            SegScore s;
            s.fua_id = area->fua_id;
            s.country = area->country;
            s.kind = kind;
            s.partition = scheme.partition_label();
            s.filters = filters;
            s.value = d.value;
            out.scores.push_back(std::move(s));
            break;
          }
          case IndexKind::aspatial_d:
          case IndexKind::aspatial_p: {
            SegScore s = kind == IndexKind::aspatial_d ? aspatial_pair().first
                                                       : aspatial_pair().second;
            s.filters = filters;
            out.scores.push_back(std::move(s));
            break;
          }
          case IndexKind::spatial_d:
          case IndexKind::spatial_p: {
            for (double r : request.radii_km) {
              SmoothingSpec spec;
              spec.radius_km = r;
              if (request.core) {
                auto [full, core] = core_vs_fua(*area, scheme, spec, kind);
                full.filters.outliers_removed = filters.outliers_removed;
                core.filters.outliers_removed = filters.outliers_removed;
                out.scores.push_back(std::move(full));
                out.scores.push_back(std::move(core));
              } else {
                SegScore s =
                    kind == IndexKind::spatial_d
                        ? spatial_dissimilarity(*area, scheme, spec, &*index)
                        : spatial_isolation(*area, scheme, spec, &*index);
                s.filters = filters;
                out.scores.push_back(std::move(s));
              }
            }
            break;
          }
        }
      }
    }
  });

  IndicesResult result;
  for (auto& slot : slots) {
    result.scores.insert(result.scores.end(),
                         std::make_move_iterator(slot.scores.begin()),
                         std::make_move_iterator(slot.scores.end()));
    result.removed_cells.insert(result.removed_cells.end(),
                                std::make_move_iterator(slot.removed_cells.begin()),
                                std::make_move_iterator(slot.removed_cells.end()));
    result.filter_skipped.insert(
        result.filter_skipped.end(),
        std::make_move_iterator(slot.filter_skipped.begin()),
        std::make_move_iterator(slot.filter_skipped.end()));
  }
  return result;
}

void write_scores_csv(const std::vector<SegScore>& scores,
                      const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(scores.size());
  for (const auto& s : scores) {
    rows.push_back({s.fua_id, s.country, to_string(s.kind),
                    s.radius_km ? format_double(*s.radius_km) : "",
                    s.partition, s.filters.label(), format_double(s.value)});
  }
  write_csv(path, {"fua_id", "country", "index", "radius_km", "partition",
                   "filters", "value"},
            rows);
}

// -- sca -------------------------------------------------------------------------

namespace {

std::string sanitize_filename(const std::string& name,
                              std::set<std::string>& used) {
  std::string base;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    base.push_back(ok ? c : '_');
  }
  if (base.empty()) base = "variable";
  std::string candidate = base;
  std::size_t suffix = 2;
  while (!used.insert(candidate).second)
    candidate = base + "_" + std::to_string(suffix++);
  return candidate;
}

void check_country_level_columns(const Catalog& catalog,
                                 const CovariateTable& data) {
  for (const auto& var : catalog.vars) {
    if (var.level != VarLevel::country) continue;
    const auto col = data.column_index(var.name);
    if (!col) continue; // caught by the unmatched-name check
    std::map<std::string, double> seen;
    for (std::size_t i = 0; i < data.row_ids.size(); ++i) {
      const double v = data.values(static_cast<Eigen::Index>(i),
                                   static_cast<Eigen::Index>(*col));
      if (std::isnan(v)) continue;
      auto [it, inserted] = seen.emplace(data.country[i], v);
      if (!inserted && it->second != v)
        throw ValidationError("country-level variable '" + var.name +
                              "' varies within country '" + data.country[i] +
                              "'");
    }
  }
}

nlohmann::ordered_json json_double(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::uint64_t name_seed(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

} // namespace

ScaRunResult run_sca(const Catalog& catalog, CovariateTable data,
                     const ScaRequest& request,
                     const std::filesystem::path& output_dir) {
  catalog.validate();
  request.limits.validate();
  const auto outcome = catalog.outcome_name();
  if (!outcome) throw ValidationError("catalog has no outcome variable");

  std::vector<std::string> unmatched;
  for (const auto& var : catalog.vars)
    if (!data.column_index(var.name)) unmatched.push_back(var.name);
  if (!unmatched.empty()) {
    std::string msg = "catalog variables missing from the covariate table:";
    for (const auto& name : unmatched) msg += " " + name;
    throw SchemaError(msg);
  }
  check_country_level_columns(catalog, data);

  ScaRunResult result;
  result.missing_report = handle_missing(data, request.missing);
  result.rows_used = data.row_ids.size();

  if (request.standardize) {
    std::vector<std::string> to_standardize;
    for (const auto& var : catalog.vars)
      if (var.role != VarRole::outcome) to_standardize.push_back(var.name);
    standardize_table(data, to_standardize);
  }

  const auto all_specs = enumerate_specs(catalog, request.limits, request.estimator);
  result.n_specs_enumerated = all_specs.size();

  std::vector<std::string> focal = request.focal_variables;
  if (focal.empty()) {
    for (const auto& var : catalog.vars)
      if (var.role == VarRole::candidate) focal.push_back(var.name);
  } else {
    for (const auto& name : focal) {
      const VariableMeta* meta = catalog.find(name);
      if (!meta)
        throw ValidationError("focal variable '" + name + "' is not in the catalog");
      if (meta->role != VarRole::candidate &&
          meta->role != VarRole::country_candidate)
        throw ValidationError("focal variable '" + name + "' is not a candidate");
    }
  }
  if (focal.empty())
    throw ValidationError("no focal variables to analyse");

  std::filesystem::create_directories(output_dir);
  std::set<std::string> used_names;
  std::vector<std::vector<std::string>> invalid_rows;

  for (const auto& variable : focal) {
    const VariableMeta& meta = *catalog.find(variable);
    const CurveResult curve =
        run_curve(all_specs, catalog, data, *outcome, variable, request.threads);

    // Per-variable bootstrap seed derived from the variable name so the
    // result does not depend on which other variables are in the run.
    const std::uint64_t var_seed =
        Rng::stream(request.seed, name_seed(variable)).next_u64();
    const CounterfactualTensor tensor =
        bootstrap_counterfactual(curve, catalog, data, *outcome,
                                 request.replications, var_seed, request.threads);

    const TestOutcome t1 = test1_sign(curve);
    const TestOutcome t2 = test2_median(curve, tensor);
    const Test3Outcome t3 = test3_ranked_band(curve, tensor);
    result.summaries.push_back(summarize(meta, curve, t1, t2, t3));

    for (const auto& [idx, reason] : curve.invalid) {
      const auto& spec = curve.specs[idx];
      std::string covs;
      for (const auto& c : spec.covariates(catalog)) {
        if (!covs.empty()) covs += "+";
        covs += c;
      }
      invalid_rows.push_back({variable, spec.spec_id, covs, reason});
    }

    const std::string stem = sanitize_filename(variable, used_names);

    nlohmann::ordered_json j;
    j["variable"] = variable;
    j["group"] = meta.group;
    j["subgroup"] = meta.subgroup;
    j["estimator"] = to_string(curve.estimator);
    j["outcome"] = *outcome;
    j["n_specs"] = curve.specs.size();
    j["n_valid"] = curve.n_valid();
    j["n_invalid"] = curve.invalid.size();
    j["median_estimate"] = json_double(curve.median_estimate);
    j["dominant_sign"] = curve.dominant_sign;
    j["bootstrap"] = {{"replications", tensor.replications},
                      {"seed", tensor.seed},
                      {"complete_replications", t3.complete_replications}};
    j["tests"] = {
        {"sign_share", {{"status", to_string(t1.status)}, {"share", t1.share}}},
        {"median_vs_null", {{"status", to_string(t2.status)}, {"share", t2.share}}},
        {"ranked_band",
         {{"status", to_string(t3.outcome.status)}, {"share", t3.outcome.share}}}};
    j["label"] = to_string(result.summaries.back().label);

    nlohmann::ordered_json spec_list = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < curve.specs.size(); ++k) {
      const auto& spec = curve.specs[k];
      nlohmann::ordered_json sj;
      sj["spec_id"] = spec.spec_id;
      sj["focal"] = spec.focal;
      sj["country"] = spec.country;
      sj["estimate"] = json_double(curve.estimates[k]);
      spec_list.push_back(std::move(sj));
    }
    j["specs"] = std::move(spec_list);

    nlohmann::ordered_json band = nlohmann::ordered_json::array();
    for (const auto& p : t3.band) {
      band.push_back({{"rank", p.rank},
                      {"observed", p.observed},
                      {"lo", p.lo},
                      {"hi", p.hi}});
    }
    j["band"] = std::move(band);

    const auto json_path = output_dir / ("curve_" + stem + ".json");
    {
      std::ofstream out(json_path);
      if (!out) throw IoError("cannot write " + json_path.string());
      out << j.dump(2) << "\n";
    }
    result.files.push_back(json_path.filename());

    // Plot data: the sorted observed curve with the per-rank null band.
    std::vector<double> observed;
    for (std::size_t k : curve.valid_idx) observed.push_back(curve.estimates[k]);
    std::sort(observed.begin(), observed.end());
    std::vector<std::vector<std::string>> plot_rows;
    for (std::size_t rank = 0; rank < observed.size(); ++rank) {
      std::string lo, hi;
      if (rank < t3.band.size()) {
        lo = format_double(t3.band[rank].lo);
        hi = format_double(t3.band[rank].hi);
      }
      plot_rows.push_back({std::to_string(rank + 1),
                           format_double(observed[rank]), lo, hi});
    }
    const auto csv_path = output_dir / ("curve_" + stem + ".csv");
    write_csv(csv_path, {"rank", "observed", "band_lo", "band_hi"}, plot_rows);
    result.files.push_back(csv_path.filename());
  }

  std::vector<std::vector<std::string>> table_rows;
  for (const auto& s : result.summaries) {
    std::string direction = "none";
    if (s.label == RobustLabel::robust_all || s.label == RobustLabel::robust)
      direction = s.dominant_sign > 0 ? "positive" : "negative";
    table_rows.push_back(
        {s.meta.name, s.meta.group, s.meta.subgroup, to_string(s.estimator),
         std::to_string(s.n_specs), std::to_string(s.n_specs - s.n_invalid),
         std::to_string(s.n_invalid), format_double(s.median_estimate),
         direction, format_double(s.test1.share), to_string(s.test1.status),
         format_double(s.test2.share), to_string(s.test2.status),
         format_double(s.test3.share), to_string(s.test3.status),
         to_string(s.label)});
  }
  const auto table_path = output_dir / "robustness.csv";
  write_csv(table_path,
            {"variable", "group", "subgroup", "estimator", "n_specs", "n_valid",
             "n_invalid", "median_estimate", "direction", "test1_share",
             "test1_status", "test2_share", "test2_status", "test3_share",
             "test3_status", "label"},
            table_rows);
  result.files.push_back(table_path.filename());

  if (!result.missing_report.imputed.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : result.missing_report.imputed)
      rows.push_back({cell.row_id, cell.column, format_double(cell.value)});
    const auto path = output_dir / "imputed_cells.csv";
    write_csv(path, {"fua_id", "column", "imputed_value"}, rows);
    result.files.push_back(path.filename());
  }
  if (!invalid_rows.empty()) {
    const auto path = output_dir / "invalid_specs.csv";
    write_csv(path, {"variable", "spec_id", "covariates", "reason"},
              invalid_rows);
    result.files.push_back(path.filename());
  }
  return result;
}

void write_covariates_csv(const CovariateTable& table,
                          const std::filesystem::path& path) {
  std::vector<std::string> header = {"fua_id", "country"};
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < table.row_ids.size(); ++i) {
    std::vector<std::string> row = {table.row_ids[i], table.country[i]};
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      const double v = table.values(static_cast<Eigen::Index>(i), j);
      row.push_back(std::isnan(v) ? "" : format_double(v));
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

// -- synthetic data ---------------------------------------------------------------

GridCollection generate_synthetic_grids(const SynthGridConfig& config,
                                        std::uint64_t seed) {
  if (config.n_areas == 0) throw ValidationError("need at least one area");
  if (config.n_countries == 0 || config.n_countries > config.n_areas)
    throw ValidationError("country count must be in [1, n_areas]");

  GridCollection areas;
  areas.reserve(config.n_areas);
  for (std::size_t i = 0; i < config.n_areas; ++i) {
    SynthCityConfig city;
    city.nx = config.nx;
    city.ny = config.ny;
    city.cell_km = config.cell_km;
    city.total_population = config.total_population;
    city.focal_share = config.focal_share;
    city.pattern = config.pattern;
    city.core_radius_km = config.core_radius_km;
    city.fua_id = "SYN" + zero_pad(i + 1, 4);
    city.name = "synthetic-" + std::to_string(i + 1);
    city.country = "C" + zero_pad(i % config.n_countries + 1, 2);
    areas.push_back(generate_synthetic_city(city, Rng::stream(seed, i).next_u64()));
  }
  return areas;
}

SynthSca generate_synthetic_sca(const SynthScaConfig& config, std::uint64_t seed,
                                const std::vector<std::string>* row_ids,
                                const std::vector<std::string>* countries) {
  if (config.n_candidates == 0)
    throw ValidationError("need at least one candidate variable");
  if (config.n_subgroups == 0)
    throw ValidationError("need at least one subgroup");
  if (config.n_country_candidates > 0 && config.n_country_subgroups == 0)
    throw ValidationError("country candidates need at least one subgroup");
  if ((row_ids == nullptr) != (countries == nullptr))
    throw ValidationError("row ids and countries must be supplied together");

  SynthSca out;
  auto& table = out.table;
  if (row_ids) {
    if (row_ids->size() != countries->size())
      throw ValidationError("row ids and countries differ in length");
    if (row_ids->empty()) throw ValidationError("no rows");
    table.row_ids = *row_ids;
    table.country = *countries;
  } else {
    if (config.n_rows < 2) throw ValidationError("need at least two rows");
    if (config.n_countries == 0 || config.n_countries > config.n_rows)
      throw ValidationError("country count must be in [1, n_rows]");
    for (std::size_t i = 0; i < config.n_rows; ++i) {
      table.row_ids.push_back("F" + zero_pad(i + 1, 4));
      table.country.push_back("C" + zero_pad(i % config.n_countries + 1, 2));
    }
  }
  const std::size_t n = table.row_ids.size();

  // Country index by first appearance.
  std::vector<std::size_t> country_of(n);
  std::unordered_map<std::string, std::size_t> country_index;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] =
        country_index.emplace(table.country[i], country_index.size());
    country_of[i] = it->second;
  }
  const std::size_t n_countries = country_index.size();

  // Catalog: outcome, base controls, fua candidates, country candidates.
  auto add_var = [&](std::string name, VarLevel level, std::string group,
                     std::string subgroup, VarRole role) {
    VariableMeta meta;
    meta.name = std::move(name);
    meta.level = level;
    meta.group = std::move(group);
    meta.subgroup = std::move(subgroup);
    meta.role = role;
    out.catalog.vars.push_back(std::move(meta));
  };
  add_var(config.outcome, VarLevel::fua, "outcome", "", VarRole::outcome);
  for (std::size_t k = 0; k < config.n_base_controls; ++k)
    add_var("b" + std::to_string(k + 1), VarLevel::fua, "base", "",
            VarRole::base_control);
  for (std::size_t j = 0; j < config.n_candidates; ++j)
    add_var("x" + std::to_string(j + 1), VarLevel::fua, "fua",
            "sg" + std::to_string(j % config.n_subgroups + 1), VarRole::candidate);
  for (std::size_t m = 0; m < config.n_country_candidates; ++m)
    add_var("z" + std::to_string(m + 1), VarLevel::country, "country",
            "cg" + std::to_string(m % config.n_country_subgroups + 1),
            VarRole::country_candidate);
  out.catalog.validate();

  std::map<std::string, double> effect_of;
  for (const auto& [name, value] : config.effects) {
    if (!out.catalog.find(name))
      throw ValidationError("effect refers to unknown variable '" + name + "'");
    effect_of[name] = value;
  }
  auto effect = [&](const std::string& name) {
    auto it = effect_of.find(name);
    return it == effect_of.end() ? 0.0 : it->second;
  };

  for (const auto& var : out.catalog.vars) table.columns.push_back(var.name);
  table.values.resize(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(table.columns.size()));

  // Stream counter far outside the per-area range used by the grid
  // generator, so grid and covariate draws never share a stream even when
  // both are fed the same master seed.
  Rng rng = Rng::stream(seed, 0xFFFFFFFFFFFFULL);
  std::vector<double> alpha(n_countries);
  for (auto& a : alpha) a = rng.normal() * config.country_sd;

  // Column-major draws keep the stream layout independent of row count
  // interleaving concerns; everything is a fixed function of (config, seed).
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t col = 1; col < table.columns.size(); ++col) {
    const std::string& name = table.columns[col];
    const VariableMeta& meta = *out.catalog.find(name);
    const double beta = effect(name);
    if (meta.level == VarLevel::country) {
      std::vector<double> per_country(n_countries);
      for (auto& v : per_country) v = rng.normal();
      for (std::size_t i = 0; i < n; ++i) {
        const double v = per_country[country_of[i]];
        table.values(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(col)) = v;
        y(static_cast<Eigen::Index>(i)) += beta * v;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.normal();
        table.values(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(col)) = v;
        y(static_cast<Eigen::Index>(i)) += beta * v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    y(static_cast<Eigen::Index>(i)) +=
        alpha[country_of[i]] + rng.normal() * config.noise_sd;
    table.values(static_cast<Eigen::Index>(i), 0) = y(static_cast<Eigen::Index>(i));
  }
  return out;
}

// -- dasymetric interpolation -------------------------------------------------------

void run_interpolate(const std::filesystem::path& zones_csv,
                     const std::filesystem::path& members_csv,
                     const std::filesystem::path& mapping_csv,
                     const std::filesystem::path& out_csv) {
  const CsvTable zones_table = read_csv(zones_csv);
  const std::string zones_label = zones_csv.filename().string();
  const std::size_t zone_id_col = zones_table.require_column("zone_id", zones_label);
  std::vector<std::string> group_names;
  std::vector<std::size_t> group_cols;
  for (std::size_t i = 0; i < zones_table.header.size(); ++i) {
    if (i == zone_id_col) continue;
    group_names.push_back(zones_table.header[i]);
    group_cols.push_back(i);
  }
  if (group_names.empty())
    throw SchemaError(zones_label + ": no population columns besides zone_id");

  std::map<std::string, SourceZone> zones;
  for (std::size_t r = 0; r < zones_table.rows.size(); ++r) {
    const auto& row = zones_table.rows[r];
    const std::string where =
        zones_label + " line " + std::to_string(zones_table.line_numbers[r]);
    SourceZone zone;
    zone.zone_id = row[zone_id_col];
    if (zone.zone_id.empty()) throw ValidationError(where + ": empty zone_id");
    for (std::size_t c : group_cols)
      zone.counts.push_back(
          parse_double(row[c], where + " column '" + zones_table.header[c] + "'"));
    if (!zones.emplace(zone.zone_id, std::move(zone)).second)
      throw ValidationError(where + ": duplicate zone_id '" + row[zone_id_col] + "'");
  }

  const CsvTable members_table = read_csv(members_csv);
  const std::string members_label = members_csv.filename().string();
  const std::size_t m_zone = members_table.require_column("zone_id", members_label);
  const std::size_t m_cell =
      members_table.require_column("fine_cell_id", members_label);
  const std::size_t m_weight = members_table.require_column("weight", members_label);
  std::set<std::pair<std::string, std::string>> seen_members;
  for (std::size_t r = 0; r < members_table.rows.size(); ++r) {
    const auto& row = members_table.rows[r];
    const std::string where =
        members_label + " line " + std::to_string(members_table.line_numbers[r]);
    auto it = zones.find(row[m_zone]);
    if (it == zones.end())
      throw ValidationError(where + ": unknown zone_id '" + row[m_zone] + "'");
    if (!seen_members.emplace(row[m_zone], row[m_cell]).second)
      throw ValidationError(where + ": duplicate member '" + row[m_cell] +
                            "' in zone '" + row[m_zone] + "'");
    SourceZone::Member member;
    member.fine_cell_id = row[m_cell];
    member.weight = parse_double(row[m_weight], where + " column 'weight'");
    it->second.members.push_back(std::move(member));
  }

  const CsvTable mapping_table = read_csv(mapping_csv);
  const std::string mapping_label = mapping_csv.filename().string();
  const std::size_t map_fine =
      mapping_table.require_column("fine_cell_id", mapping_label);
  const std::size_t map_target =
      mapping_table.require_column("target_cell_id", mapping_label);
  std::map<std::string, std::string> fine_to_target;
  for (std::size_t r = 0; r < mapping_table.rows.size(); ++r) {
    const auto& row = mapping_table.rows[r];
    const std::string where =
        mapping_label + " line " + std::to_string(mapping_table.line_numbers[r]);
    if (!fine_to_target.emplace(row[map_fine], row[map_target]).second)
      throw ValidationError(where + ": duplicate fine_cell_id '" + row[map_fine] +
                            "'");
  }

  std::vector<SourceZone> zone_list;
  zone_list.reserve(zones.size());
  for (auto& [id, zone] : zones) zone_list.push_back(std::move(zone));

  const auto targets = dasymetric_interpolate(zone_list, fine_to_target);

  std::vector<std::string> header = {"target_cell_id"};
  header.insert(header.end(), group_names.begin(), group_names.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& [target, counts] : targets) {
    std::vector<std::string> row = {target};
    for (double c : counts) row.push_back(format_double(c));
    rows.push_back(std::move(row));
  }
  write_csv(out_csv, header, rows);
}

// -- manifest --------------------------------------------------------------------------

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& output_dir,
                    const std::vector<std::filesystem::path>& outputs) {
  nlohmann::ordered_json j;
  j["command"] = manifest.command;
  j["config_digest"] = manifest.config_digest;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [path, digest] : manifest.inputs) inputs[path] = digest;
  j["inputs"] = std::move(inputs);
  if (manifest.master_seed)
    j["master_seed"] = *manifest.master_seed;
  else
    j["master_seed"] = nullptr;
  j["tool_version"] = manifest.tool_version;
  j["wall_clock_seconds"] = manifest.wall_clock_seconds;
  j["details"] = manifest.details.is_null() ? nlohmann::ordered_json::object()
                                            : manifest.details;
  nlohmann::ordered_json out_digests = nlohmann::ordered_json::object();
  for (const auto& path : outputs)
    out_digests[path.generic_string()] = Sha256::of_file(output_dir / path);
  j["outputs"] = std::move(out_digests);

  std::filesystem::create_directories(output_dir);
  const auto path = output_dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

} // namespace segsca
