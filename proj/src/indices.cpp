#include "indices.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace segsca {

std::string to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::spatial_d: return "spatial_D";
    case IndexKind::spatial_p: return "spatial_P";
    case IndexKind::aspatial_d: return "aspatial_D";
    case IndexKind::aspatial_p: return "aspatial_P";
    case IndexKind::dispersion: return "dispersion";
  }
  return "?";
}

IndexKind index_kind_from_string(const std::string& name) {
  if (name == "spatial_D" || name == "spatial-d") return IndexKind::spatial_d;
  if (name == "spatial_P" || name == "spatial-p") return IndexKind::spatial_p;
  if (name == "aspatial_D" || name == "aspatial-d") return IndexKind::aspatial_d;
  if (name == "aspatial_P" || name == "aspatial-p") return IndexKind::aspatial_p;
  if (name == "dispersion") return IndexKind::dispersion;
  throw ValidationError("unknown index kind '" + name + "'");
}

std::string Filters::label() const {
  if (outliers_removed && core_only) return "outliers+core";
  if (outliers_removed) return "outliers";
  if (core_only) return "core";
  return "none";
}

namespace {

struct TwoGroupView {
  std::vector<double> cell_total; // tau_p
  std::vector<double> cell_focal; // tau_pm for the focal side
  double total = 0.0;             // T
  double focal = 0.0;             // T_m
};

TwoGroupView aggregate(const UrbanArea& area, const GroupScheme& scheme) {
  scheme.validate();
  if (scheme.groups != area.group_names)
    throw ValidationError("group scheme does not match area '" + area.fua_id + "'");
  TwoGroupView v;
  const std::size_t n = area.cells.size();
  v.cell_total.resize(n);
  v.cell_focal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& counts = area.cells[i].counts;
    double t = 0.0;
    for (double c : counts) t += c;
    double f = 0.0;
    for (std::size_t g : scheme.focal) f += counts[g];
    v.cell_total[i] = t;
    v.cell_focal[i] = f;
    v.total += t;
    v.focal += f;
  }
  return v;
}

void check_bounded(double value, const std::string& what,
                   const std::string& fua_id) {
  if (!std::isfinite(value) || value < -1e-9 || value > 1.0 + 1e-9)
    throw NumericError(what + " out of [0, 1] for area '" + fua_id + "'");
}

double smoothed_focal(const LocalEnvironment& env, const GroupScheme& scheme,
                      std::size_t cell) {
  double f = 0.0;
  for (std::size_t g : scheme.focal) f += env.count(cell, g);
  return f;
}

double spatial_d_value(const UrbanArea& area, const GroupScheme& scheme,
                       const TwoGroupView& v, const LocalEnvironment& env) {
  const double pi_f = v.focal / v.total;
  const double pi_r = (v.total - v.focal) / v.total;
  const double interaction = pi_f * (1.0 - pi_f) + pi_r * (1.0 - pi_r);
  if (interaction <= 0.0)
    throw DegenerateCompositionError(
        "area '" + area.fua_id + "' has a single populated group; "
        "dissimilarity is undefined");
  double acc = 0.0;
  for (std::size_t p = 0; p < area.cells.size(); ++p) {
    const double smoothed_total = env.smoothed_total[p];
    if (smoothed_total <= 0.0) continue;
    const double f = smoothed_focal(env, scheme, p);
    const double prop_f = f / smoothed_total;
    const double prop_r = (smoothed_total - f) / smoothed_total;
    acc += v.cell_total[p] *
           (std::abs(prop_f - pi_f) + std::abs(prop_r - pi_r));
  }
  return acc / (2.0 * v.total * interaction);
}

double spatial_p_value(const UrbanArea& area, const GroupScheme& scheme,
                       const TwoGroupView& v, const LocalEnvironment& env) {
  if (v.focal <= 0.0)
    throw DegenerateCompositionError(
        "area '" + area.fua_id + "' has no focal population; "
        "isolation is undefined");
  double acc = 0.0;
  for (std::size_t p = 0; p < area.cells.size(); ++p) {
    const double smoothed_total = env.smoothed_total[p];
    if (smoothed_total <= 0.0 || v.cell_focal[p] <= 0.0) continue;
    const double prop_f = smoothed_focal(env, scheme, p) / smoothed_total;
    acc += (v.cell_focal[p] / v.focal) * prop_f;
  }
  return acc;
}

SegScore make_score(const UrbanArea& area, const GroupScheme& scheme,
                    IndexKind kind, std::optional<double> radius, double value) {
  SegScore s;
  s.fua_id = area.fua_id;
  s.country = area.country;
  s.kind = kind;
  s.radius_km = radius;
  s.partition = scheme.partition_label();
  s.value = value;
  return s;
}

} // namespace

SegScore spatial_dissimilarity(const UrbanArea& area, const GroupScheme& scheme,
                               const SmoothingSpec& spec,
                               const NeighborIndex* index) {
  spec.validate();
  const TwoGroupView v = aggregate(area, scheme);
  const LocalEnvironment env =
      index ? smooth(area, spec, *index) : smooth(area, spec);
  const double value = spatial_d_value(area, scheme, v, env);
  check_bounded(value, "spatial dissimilarity", area.fua_id);
  return make_score(area, scheme, IndexKind::spatial_d, spec.radius_km, value);
}

SegScore spatial_isolation(const UrbanArea& area, const GroupScheme& scheme,
                           const SmoothingSpec& spec,
                           const NeighborIndex* index) {
  spec.validate();
  const TwoGroupView v = aggregate(area, scheme);
  const LocalEnvironment env =
      index ? smooth(area, spec, *index) : smooth(area, spec);
  const double value = spatial_p_value(area, scheme, v, env);
  check_bounded(value, "spatial isolation", area.fua_id);
  return make_score(area, scheme, IndexKind::spatial_p, spec.radius_km, value);
}

std::pair<SegScore, SegScore> aspatial_indices(const UrbanArea& area,
                                               const GroupScheme& scheme) {
  const TwoGroupView v = aggregate(area, scheme);
  const double focal_total = v.focal;
  const double ref_total = v.total - v.focal;
  if (focal_total <= 0.0 || ref_total <= 0.0)
    throw DegenerateCompositionError(
        "area '" + area.fua_id + "' has a single populated group; "
        "classical indices are undefined");

  double d_acc = 0.0;
  double p_acc = 0.0;
  for (std::size_t p = 0; p < area.cells.size(); ++p) {
    const double f = v.cell_focal[p];
    const double r = v.cell_total[p] - f;
    d_acc += std::abs(f / focal_total - r / ref_total);
    if (v.cell_total[p] > 0.0 && f > 0.0)
      p_acc += (f / focal_total) * (f / v.cell_total[p]);
  }
  const double d = 0.5 * d_acc;
  check_bounded(d, "classical dissimilarity", area.fua_id);
  check_bounded(p_acc, "classical isolation", area.fua_id);
  return {make_score(area, scheme, IndexKind::aspatial_d, std::nullopt, d),
          make_score(area, scheme, IndexKind::aspatial_p, std::nullopt, p_acc)};
}

DispersionScore population_dispersion(const UrbanArea& area) {
  double total = 0.0;
  std::size_t populated = 0;
  for (const auto& cell : area.cells) {
    const double t = cell.total();
    if (t > 0.0) {
      total += t;
      ++populated;
    }
  }
  if (populated == 0 || total <= 0.0)
    throw ValidationError("area '" + area.fua_id + "' has zero total population");
  DispersionScore score;
  score.fua_id = area.fua_id;
  if (populated == 1) {
    score.value = 0.0;
    return score;
  }
  double entropy = 0.0;
  for (const auto& cell : area.cells) {
    const double t = cell.total();
    if (t <= 0.0) continue;
    const double s = t / total;
    entropy -= s * std::log(s);
  }
  score.value = entropy / std::log(static_cast<double>(populated));
  check_bounded(score.value, "population dispersion", area.fua_id);
  return score;
}

std::vector<SegScore> scale_profile(const UrbanArea& area,
                                    const GroupScheme& scheme,
                                    std::span<const double> radii_km,
                                    IndexKind kind) {
  if (kind != IndexKind::spatial_d && kind != IndexKind::spatial_p)
    throw ValidationError("scale profile supports spatial kinds only");
  const NeighborIndex index(area);
  std::vector<SegScore> scores;
  scores.reserve(radii_km.size());
  for (double r : radii_km) {
    SmoothingSpec spec;
    spec.radius_km = r;
    scores.push_back(kind == IndexKind::spatial_d
                         ? spatial_dissimilarity(area, scheme, spec, &index)
                         : spatial_isolation(area, scheme, spec, &index));
  }
  return scores;
}

std::pair<SegScore, SegScore> core_vs_fua(const UrbanArea& area,
                                          const GroupScheme& scheme,
                                          const SmoothingSpec& spec,
                                          IndexKind kind) {
  if (kind != IndexKind::spatial_d && kind != IndexKind::spatial_p)
    throw ValidationError("core comparison supports spatial kinds only");
  const UrbanArea core = area.core_subarea();

  auto compute = [&](const UrbanArea& a, bool is_core) {
    if (kind == IndexKind::spatial_d) {
      const double focal = a.focal_total(scheme);
      const double total = a.total_population();
      if (is_core && (focal <= 0.0 || focal >= total)) {
        // A single-group core has every local environment equal to its own
        // composition, so it counts as perfectly even.
        SegScore s = make_score(a, scheme, kind, spec.radius_km, 0.0);
        s.filters.core_only = true;
        return s;
      }
      return spatial_dissimilarity(a, scheme, spec);
    }
    return spatial_isolation(a, scheme, spec);
  };

  SegScore full = compute(area, false);
  SegScore core_score = compute(core, true);
  core_score.filters.core_only = true;
  return {full, core_score};
}

VarianceDecomposition variance_decomposition(
    const std::vector<std::pair<std::string, double>>& values_by_country) {
  if (values_by_country.empty())
    throw ValidationError("variance decomposition needs at least one value");

  double grand_sum = 0.0;
  for (const auto& [country, value] : values_by_country) {
    if (!std::isfinite(value))
      throw ValidationError("variance decomposition input is not finite");
    grand_sum += value;
  }
  const double n = static_cast<double>(values_by_country.size());
  const double grand_mean = grand_sum / n;

  struct Group {
    double sum = 0.0;
    double count = 0.0;
  };
  std::map<std::string, Group> groups;
  for (const auto& [country, value] : values_by_country) {
    auto& g = groups[country];
    g.sum += value;
    g.count += 1.0;
  }

  double ss_between = 0.0;
  for (const auto& [country, g] : groups) {
    const double mean = g.sum / g.count;
    ss_between += g.count * (mean - grand_mean) * (mean - grand_mean);
  }
  double ss_total = 0.0;
  for (const auto& [country, value] : values_by_country)
    ss_total += (value - grand_mean) * (value - grand_mean);

  VarianceDecomposition out;
  if (ss_total <= 0.0) {
    out.zero_variance = true;
    return out;
  }
  out.between_share = ss_between / ss_total;
  out.within_share = (ss_total - ss_between) / ss_total;
  return out;
}

} // namespace segsca
