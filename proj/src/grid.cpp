#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace segsca {

namespace {

std::string coord_cell_id(double x, double y) {
  return format_double(x) + "_" + format_double(y);
}

} // namespace

double GridCell::total() const {
  double t = 0.0;
  for (double c : counts) t += c;
  return t;
}

GroupScheme GroupScheme::by_focal_names(
    const std::vector<std::string>& groups,
    const std::vector<std::string>& focal_names) {
  GroupScheme scheme;
  scheme.groups = groups;
  for (const auto& name : focal_names) {
    auto it = std::find(groups.begin(), groups.end(), name);
    if (it == groups.end())
      throw ValidationError("focal group '" + name + "' is not a known group");
    scheme.focal.push_back(static_cast<std::size_t>(it - groups.begin()));
  }
  std::sort(scheme.focal.begin(), scheme.focal.end());
  scheme.validate();
  return scheme;
}

void GroupScheme::validate() const {
  if (groups.size() < 2)
    throw ValidationError("group scheme needs at least two groups");
  if (focal.empty())
    throw ValidationError("group scheme has an empty focal set");
  std::set<std::size_t> seen;
  for (std::size_t idx : focal) {
    if (idx >= groups.size())
      throw ValidationError("focal index out of range in group scheme");
    if (!seen.insert(idx).second)
      throw ValidationError("duplicate focal group in scheme");
  }
  if (focal.size() == groups.size())
    throw ValidationError("group scheme has an empty reference set");
}

bool GroupScheme::is_focal(std::size_t group_idx) const {
  return std::find(focal.begin(), focal.end(), group_idx) != focal.end();
}

std::string GroupScheme::partition_label() const {
  std::string label;
  for (std::size_t idx : focal) {
    if (!label.empty()) label += "+";
    label += groups[idx];
  }
  return label;
}

double UrbanArea::total_population() const {
  double t = 0.0;
  for (const auto& cell : cells) t += cell.total();
  return t;
}

double UrbanArea::group_total(std::size_t group_idx) const {
  double t = 0.0;
  for (const auto& cell : cells) t += cell.counts[group_idx];
  return t;
}

double UrbanArea::focal_total(const GroupScheme& scheme) const {
  double t = 0.0;
  for (std::size_t idx : scheme.focal) t += group_total(idx);
  return t;
}

bool UrbanArea::has_core() const {
  for (std::uint8_t flag : core_mask)
    if (flag) return true;
  return false;
}

UrbanArea UrbanArea::core_subarea() const {
  if (!has_core())
    throw ValidationError("area '" + fua_id + "' has no core cells");
  UrbanArea core;
  core.fua_id = fua_id;
  core.name = name + " (core)";
  core.country = country;
  core.group_names = group_names;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (core_mask[i]) core.cells.push_back(cells[i]);
  core.finalize();
  return core;
}

void UrbanArea::finalize() {
  if (cells.empty())
    throw ValidationError("area '" + fua_id + "' has no cells");
  if (group_names.empty())
    throw ValidationError("area '" + fua_id + "' has no population groups");
  if (!core_mask.empty() && core_mask.size() != cells.size())
    throw ValidationError("area '" + fua_id + "' core mask length mismatch");

  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cells[a].x_km != cells[b].x_km) return cells[a].x_km < cells[b].x_km;
    return cells[a].y_km < cells[b].y_km;
  });
  std::vector<GridCell> sorted_cells;
  sorted_cells.reserve(cells.size());
  std::vector<std::uint8_t> sorted_mask;
  if (!core_mask.empty()) sorted_mask.reserve(cells.size());
  for (std::size_t idx : order) {
    sorted_cells.push_back(std::move(cells[idx]));
    if (!core_mask.empty()) sorted_mask.push_back(core_mask[idx]);
  }
  cells = std::move(sorted_cells);
  core_mask = std::move(sorted_mask);

  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& cell = cells[i];
    if (!std::isfinite(cell.x_km) || !std::isfinite(cell.y_km))
      throw ValidationError("area '" + fua_id + "' cell '" + cell.cell_id +
                            "' has non-finite coordinates");
    if (cell.counts.size() != group_names.size())
      throw ValidationError("area '" + fua_id + "' cell '" + cell.cell_id +
                            "' has wrong group count");
    for (double c : cell.counts)
      if (!(c >= 0.0) || !std::isfinite(c))
        throw ValidationError("area '" + fua_id + "' cell '" + cell.cell_id +
                              "' has a negative or non-finite count");
    if (cell.cell_id.empty()) cell.cell_id = coord_cell_id(cell.x_km, cell.y_km);
    if (i > 0 && cells[i - 1].x_km == cell.x_km &&
        cells[i - 1].y_km == cell.y_km)
      throw ValidationError("area '" + fua_id + "' has two cells at centroid (" +
                            format_double(cell.x_km) + ", " +
                            format_double(cell.y_km) + ")");
  }
  if (!(total_population() > 0.0))
    throw ValidationError("area '" + fua_id + "' has zero total population");
}

GridCollection ingest_grid(const std::filesystem::path& path,
                           const GridSchema& schema) {
  const CsvTable table = read_csv(path);
  const std::string label = path.filename().string();

  const std::size_t col_fua = table.require_column(schema.fua_id, label);
  const std::size_t col_name = table.require_column(schema.fua_name, label);
  const std::size_t col_country = table.require_column(schema.country, label);
  const std::size_t col_x = table.require_column(schema.x_km, label);
  const std::size_t col_y = table.require_column(schema.y_km, label);

  std::vector<std::string> group_names = schema.group_columns;
  std::vector<std::size_t> group_cols;
  if (group_names.empty()) {
    // Auto-detected group columns drop the prefix, so "pop_focal" becomes
    // group "focal"; write_grid adds the prefix back for a clean round trip.
    for (std::size_t i = 0; i < table.header.size(); ++i)
      if (table.header[i].rfind(schema.group_prefix, 0) == 0) {
        const std::string name = table.header[i].substr(schema.group_prefix.size());
        if (name.empty())
          throw SchemaError(label + ": group column '" + table.header[i] +
                            "' has an empty group name");
        if (std::find(group_names.begin(), group_names.end(), name) !=
            group_names.end())
          throw SchemaError(label + ": duplicate group name '" + name + "'");
        group_names.push_back(name);
        group_cols.push_back(i);
      }
    if (group_names.size() < 2)
      throw SchemaError(label + ": need at least two '" + schema.group_prefix +
                        "*' group columns");
  } else {
    for (const auto& name : group_names)
      group_cols.push_back(table.require_column(name, label));
  }

  const auto col_male = table.column(schema.male);
  const auto col_female = table.column(schema.female);
  if (col_male.has_value() != col_female.has_value())
    throw SchemaError(label + ": columns '" + schema.male + "' and '" +
                      schema.female + "' must both be present or both absent");
  const auto col_core = table.column(schema.core_flag);

  struct AreaDraft {
    UrbanArea area;
    std::set<std::pair<double, double>> centroids;
  };
  std::vector<std::string> fua_order;
  std::unordered_map<std::string, AreaDraft> drafts;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = label + " line " + std::to_string(table.line_numbers[r]);
    const std::string& fua = row[col_fua];
    if (fua.empty()) throw ValidationError(where + ": empty fua_id");

    GridCell cell;
    cell.x_km = parse_double(row[col_x], where + " column '" + schema.x_km + "'");
    cell.y_km = parse_double(row[col_y], where + " column '" + schema.y_km + "'");
    if (!std::isfinite(cell.x_km) || !std::isfinite(cell.y_km))
      throw ValidationError(where + ": non-finite coordinate");
    cell.cell_id = coord_cell_id(cell.x_km, cell.y_km);
    cell.counts.reserve(group_cols.size());
    for (std::size_t g = 0; g < group_cols.size(); ++g) {
      const double v = parse_double(row[group_cols[g]],
                                    where + " column '" + group_names[g] + "'");
      if (v < 0.0)
        throw ValidationError(where + ": negative count in column '" +
                              group_names[g] + "'");
      if (!std::isfinite(v))
        throw ValidationError(where + ": non-finite count in column '" +
                              group_names[g] + "'");
      cell.counts.push_back(v);
    }
    if (col_male) {
      const double m = parse_double(row[*col_male], where + " column '" + schema.male + "'");
      const double f = parse_double(row[*col_female], where + " column '" + schema.female + "'");
      if (m < 0.0 || f < 0.0)
        throw ValidationError(where + ": negative sex count");
      cell.male_count = m;
      cell.female_count = f;
    }

    auto [it, inserted] = drafts.try_emplace(fua);
    AreaDraft& draft = it->second;
    if (inserted) {
      fua_order.push_back(fua);
      draft.area.fua_id = fua;
      draft.area.name = row[col_name];
      draft.area.country = row[col_country];
      draft.area.group_names = group_names;
    } else {
      if (draft.area.country != row[col_country])
        throw ValidationError(where + ": fua '" + fua +
                              "' appears with conflicting countries");
    }
    if (!draft.centroids.insert({cell.x_km, cell.y_km}).second)
      throw ValidationError(where + ": duplicate cell centroid (" +
                            format_double(cell.x_km) + ", " +
                            format_double(cell.y_km) + ") in fua '" + fua + "'");
    if (col_core) {
      const double flag = parse_double(row[*col_core],
                                       where + " column '" + schema.core_flag + "'");
      draft.area.core_mask.push_back(flag != 0.0 ? 1 : 0);
    }
    draft.area.cells.push_back(std::move(cell));
  }

  if (drafts.empty()) throw ValidationError(label + ": no data rows");

  std::sort(fua_order.begin(), fua_order.end());
  GridCollection areas;
  areas.reserve(fua_order.size());
  for (const auto& fua : fua_order) {
    UrbanArea& area = drafts.at(fua).area;
    area.finalize();
    areas.push_back(std::move(area));
  }
  return areas;
}

void write_grid(const GridCollection& areas, const std::filesystem::path& path,
                const GridSchema& schema) {
  if (areas.empty()) throw ValidationError("cannot write an empty grid");
  const auto& group_names = areas.front().group_names;
  bool any_sex = false, any_core = false;
  for (const auto& area : areas) {
    if (area.group_names != group_names)
      throw ValidationError("areas disagree on group columns");
    if (!area.cells.empty() && area.cells.front().male_count) any_sex = true;
    if (!area.core_mask.empty()) any_core = true;
  }

  std::vector<std::string> header = {schema.fua_id, schema.fua_name,
                                     schema.country, schema.x_km, schema.y_km};
  for (const auto& name : group_names)
    header.push_back(name.rfind(schema.group_prefix, 0) == 0
                         ? name
                         : schema.group_prefix + name);
  if (any_sex) {
    header.push_back(schema.male);
    header.push_back(schema.female);
  }
  if (any_core) header.push_back(schema.core_flag);

  std::vector<std::vector<std::string>> rows;
  for (const auto& area : areas) {
    for (std::size_t i = 0; i < area.cells.size(); ++i) {
      const auto& cell = area.cells[i];
      std::vector<std::string> row = {area.fua_id, area.name, area.country,
                                      format_double(cell.x_km),
                                      format_double(cell.y_km)};
      for (double c : cell.counts) row.push_back(format_double(c));
      if (any_sex) {
        row.push_back(format_double(cell.male_count.value_or(0.0)));
        row.push_back(format_double(cell.female_count.value_or(0.0)));
      }
      if (any_core)
        row.push_back(area.core_mask.empty()
                          ? "0"
                          : std::to_string(int(area.core_mask[i])));
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

std::map<std::string, std::vector<double>> dasymetric_interpolate(
    const std::vector<SourceZone>& zones,
    const std::map<std::string, std::string>& fine_to_target) {
  std::map<std::string, std::vector<double>> result;
  if (zones.empty()) return result;
  const std::size_t n_groups = zones.front().counts.size();

  for (const auto& zone : zones) {
    if (zone.counts.size() != n_groups)
      throw ValidationError("zone '" + zone.zone_id +
                            "' has a mismatched group count");
    double weight_sum = 0.0;
    for (const auto& m : zone.members) {
      if (!(m.weight >= 0.0) || !std::isfinite(m.weight))
        throw ValidationError("zone '" + zone.zone_id + "' member '" +
                              m.fine_cell_id + "' has an invalid weight");
      weight_sum += m.weight;
    }
    double count_sum = 0.0;
    for (double c : zone.counts) {
      if (!(c >= 0.0) || !std::isfinite(c))
        throw ValidationError("zone '" + zone.zone_id + "' has an invalid count");
      count_sum += c;
    }
    if (count_sum > 0.0 && weight_sum <= 0.0)
      throw ValidationError("zone '" + zone.zone_id +
                            "' has positive population but zero total weight");
    if (weight_sum <= 0.0) continue;

    for (const auto& m : zone.members) {
      auto it = fine_to_target.find(m.fine_cell_id);
      if (it == fine_to_target.end())
        throw ValidationError("fine cell '" + m.fine_cell_id + "' in zone '" +
                              zone.zone_id + "' has no target mapping");
      auto& acc = result[it->second];
      if (acc.empty()) acc.assign(n_groups, 0.0);
      const double share = m.weight / weight_sum;
      for (std::size_t g = 0; g < n_groups; ++g)
        acc[g] += zone.counts[g] * share;
    }
  }
  return result;
}

OutlierFilterResult filter_outlier_cells(const UrbanArea& area,
                                         const GroupScheme& scheme) {
  scheme.validate();
  if (scheme.groups != area.group_names)
    throw ValidationError("group scheme does not match area '" + area.fua_id + "'");

  OutlierFilterResult result;
  if (area.cells.size() < 5) {
    result.area = area;
    result.skipped_small_area = true;
    return result;
  }

  const std::size_t n = area.cells.size();
  std::vector<double> share(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cell = area.cells[i];
    const double total = cell.total();
    if (total > 0.0) {
      double focal = 0.0;
      for (std::size_t g : scheme.focal) focal += cell.counts[g];
      share[i] = focal / total;
    }
  }

  std::vector<std::uint8_t> keep(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (share[i] < 0.5) continue;

    // Mean focal share over the 4 nearest cells; ties broken by
    // (distance, cell_id) so the neighbour set is reproducible.
    std::vector<std::size_t> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    const auto& cells = area.cells;
    auto closer = [&](std::size_t a, std::size_t b) {
      const double dxa = cells[a].x_km - cells[i].x_km;
      const double dya = cells[a].y_km - cells[i].y_km;
      const double dxb = cells[b].x_km - cells[i].x_km;
      const double dyb = cells[b].y_km - cells[i].y_km;
      const double da = dxa * dxa + dya * dya;
      const double db = dxb * dxb + dyb * dyb;
      if (da != db) return da < db;
      return cells[a].cell_id < cells[b].cell_id;
    };
    std::partial_sort(others.begin(), others.begin() + 4, others.end(), closer);
    double neighbour_mean = 0.0;
    for (std::size_t k = 0; k < 4; ++k) neighbour_mean += share[others[k]];
    neighbour_mean /= 4.0;

    bool remove = share[i] >= 5.0 * neighbour_mean;
    if (!remove && cells[i].male_count && cells[i].female_count)
      remove = *cells[i].male_count >= 2.0 * *cells[i].female_count;
    if (remove) {
      keep[i] = 0;
      result.removed_cell_ids.push_back(cells[i].cell_id);
    }
  }

  UrbanArea filtered;
  filtered.fua_id = area.fua_id;
  filtered.name = area.name;
  filtered.country = area.country;
  filtered.group_names = area.group_names;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    filtered.cells.push_back(area.cells[i]);
    if (!area.core_mask.empty()) filtered.core_mask.push_back(area.core_mask[i]);
  }
  if (filtered.cells.empty())
    throw ValidationError("outlier filter would remove every cell of area '" +
                          area.fua_id + "'");
  filtered.finalize();
  result.area = std::move(filtered);
  return result;
}

SynthPattern synth_pattern_from_string(const std::string& name) {
  if (name == "uniform") return SynthPattern::uniform;
  if (name == "radial-gradient" || name == "radial")
    return SynthPattern::radial_gradient;
  if (name == "two-block") return SynthPattern::two_block;
  if (name == "random") return SynthPattern::random;
  throw ValidationError("unknown synthetic pattern '" + name + "'");
}

std::string to_string(SynthPattern p) {
  switch (p) {
    case SynthPattern::uniform: return "uniform";
    case SynthPattern::radial_gradient: return "radial-gradient";
    case SynthPattern::two_block: return "two-block";
    case SynthPattern::random: return "random";
  }
  return "?";
}

namespace {

// Distributes `target` over cells proportionally to `weights`, capping each
// cell at caps[i] and re-spreading the excess until it fits. Preserves the
// requested total exactly up to float addition error.
std::vector<double> capped_proportional_fill(const std::vector<double>& caps,
                                             const std::vector<double>& weights,
                                             double target) {
  const std::size_t n = caps.size();
  std::vector<double> out(n, 0.0);
  std::vector<std::uint8_t> active(n, 1);
  double remaining = target;
  for (std::size_t pass = 0; pass < n; ++pass) {
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i]) weight_sum += weights[i];
    if (remaining <= 0.0 || weight_sum <= 0.0) break;
    const double scale = remaining / weight_sum;
    bool clamped = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (scale * weights[i] > caps[i]) {
        out[i] = caps[i];
        remaining -= caps[i];
        active[i] = 0;
        clamped = true;
      }
    }
    if (!clamped) {
      for (std::size_t i = 0; i < n; ++i)
        if (active[i]) out[i] = scale * weights[i];
      remaining = 0.0;
      break;
    }
  }
  if (remaining > 1e-9 * std::max(1.0, target))
    throw ValidationError("cannot place the requested focal population: "
                          "cell capacities too small for the pattern");
  return out;
}

} // namespace

UrbanArea generate_synthetic_city(const SynthCityConfig& config,
                                  std::uint64_t seed) {
  if (config.nx < 1 || config.ny < 1)
    throw ValidationError("synthetic city needs nx >= 1 and ny >= 1");
  if (config.pattern == SynthPattern::two_block && config.nx < 2)
    throw ValidationError("two-block pattern needs nx >= 2");
  if (!(config.total_population > 0.0))
    throw ValidationError("synthetic city needs a positive population");
  if (config.focal_share <= 0.0 || config.focal_share >= 1.0)
    throw ValidationError("focal share must be inside (0, 1)");
  if (config.group_names.size() < 2 ||
      config.focal_group >= config.group_names.size())
    throw ValidationError("synthetic city needs two groups and a valid focal index");

  const std::size_t n = static_cast<std::size_t>(config.nx) * config.ny;
  Rng rng(seed);

  std::vector<double> totals(n, 0.0);
  std::vector<double> focal(n, 0.0);
  const double pop = config.total_population;
  const double target_focal = pop * config.focal_share;

  auto cell_x = [&](std::size_t idx) {
    return static_cast<double>(idx % config.nx) * config.cell_km;
  };
  auto cell_y = [&](std::size_t idx) {
    return static_cast<double>(idx / config.nx) * config.cell_km;
  };

  switch (config.pattern) {
    case SynthPattern::uniform: {
      const double t = pop / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        totals[i] = t;
        focal[i] = t * config.focal_share;
      }
      break;
    }
    case SynthPattern::two_block: {
      std::size_t n_left = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (static_cast<int>(i % config.nx) < config.nx / 2) ++n_left;
      const std::size_t n_right = n - n_left;
      for (std::size_t i = 0; i < n; ++i) {
        const bool left = static_cast<int>(i % config.nx) < config.nx / 2;
        if (left) {
          focal[i] = target_focal / static_cast<double>(n_left);
          totals[i] = focal[i];
        } else {
          totals[i] = (pop - target_focal) / static_cast<double>(n_right);
        }
      }
      break;
    }
    case SynthPattern::radial_gradient: {
      const double cx = (config.nx - 1) * 0.5 * config.cell_km;
      const double cy = (config.ny - 1) * 0.5 * config.cell_km;
      const double scale =
          std::max(1.0, std::max(config.nx, config.ny) * config.cell_km / 4.0);
      const double t = pop / static_cast<double>(n);
      std::vector<double> weights(n);
      for (std::size_t i = 0; i < n; ++i) {
        totals[i] = t;
        const double dx = cell_x(i) - cx;
        const double dy = cell_y(i) - cy;
        weights[i] = std::exp(-std::sqrt(dx * dx + dy * dy) / scale);
      }
      focal = capped_proportional_fill(totals, weights, target_focal);
      break;
    }
    case SynthPattern::random: {
      std::vector<double> raw(n);
      double raw_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        raw[i] = rng.uniform(0.25, 1.75);
        raw_sum += raw[i];
      }
      std::vector<double> weights(n);
      for (std::size_t i = 0; i < n; ++i) {
        totals[i] = pop * raw[i] / raw_sum;
        weights[i] = totals[i] * rng.uniform01();
      }
      focal = capped_proportional_fill(totals, weights, target_focal);
      break;
    }
  }

  UrbanArea area;
  area.fua_id = config.fua_id;
  area.name = config.name;
  area.country = config.country;
  area.group_names = config.group_names;
  const bool with_core = config.core_radius_km > 0.0;
  const double cx = (config.nx - 1) * 0.5 * config.cell_km;
  const double cy = (config.ny - 1) * 0.5 * config.cell_km;
  for (std::size_t i = 0; i < n; ++i) {
    GridCell cell;
    cell.x_km = cell_x(i);
    cell.y_km = cell_y(i);
    cell.cell_id = format_double(cell.x_km) + "_" + format_double(cell.y_km);
    cell.counts.assign(config.group_names.size(), 0.0);
    cell.counts[config.focal_group] = focal[i];
    const std::size_t reference =
        config.focal_group == 0 ? 1 : config.focal_group - 1;
    cell.counts[reference] = totals[i] - focal[i];
    area.cells.push_back(std::move(cell));
    if (with_core) {
      const double dx = cell_x(i) - cx;
      const double dy = cell_y(i) - cy;
      area.core_mask.push_back(
          dx * dx + dy * dy <= config.core_radius_km * config.core_radius_km ? 1 : 0);
    }
  }
  area.finalize();
  return area;
}

} // namespace segsca
