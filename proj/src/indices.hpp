#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grid.hpp"
#include "smoothing.hpp"

namespace segsca {

enum class IndexKind { spatial_d, spatial_p, aspatial_d, aspatial_p, dispersion };

std::string to_string(IndexKind kind);
IndexKind index_kind_from_string(const std::string& name);

struct Filters {
  bool outliers_removed = false;
  bool core_only = false;

  std::string label() const;
};

struct SegScore {
  std::string fua_id;
  std::string country;
  IndexKind kind = IndexKind::spatial_d;
  std::optional<double> radius_km; // empty for aspatial kinds
  std::string partition;
  Filters filters;
  double value = 0.0;
};

struct DispersionScore {
  std::string fua_id;
  double value = 0.0;
};

// Evenness of the focal/reference split across kernel-smoothed local
// environments; 0 when every local environment matches the area composition,
// 1 under complete separation.
SegScore spatial_dissimilarity(const UrbanArea& area, const GroupScheme& scheme,
                               const SmoothingSpec& spec,
                               const NeighborIndex* index = nullptr);

// Population-weighted mean focal proportion of the local environments
// experienced by focal residents.
SegScore spatial_isolation(const UrbanArea& area, const GroupScheme& scheme,
                           const SmoothingSpec& spec,
                           const NeighborIndex* index = nullptr);

// Classical (zero-radius) dissimilarity and isolation, returned as
// {D, P*}; used both as CLI output and as the smoothing-free reference.
std::pair<SegScore, SegScore> aspatial_indices(const UrbanArea& area,
                                               const GroupScheme& scheme);

// Normalized entropy of total population over populated cells; 0 for a
// point mass, 1 when all populated cells hold equal counts.
DispersionScore population_dispersion(const UrbanArea& area);

// One score per requested radius, in input order, sharing one neighbour
// index. kind must be spatial_d or spatial_p.
std::vector<SegScore> scale_profile(const UrbanArea& area,
                                    const GroupScheme& scheme,
                                    std::span<const double> radii_km,
                                    IndexKind kind = IndexKind::spatial_d);

// Index on the full area and on the core treated as a standalone area
// (own composition, smoothing truncated at the core boundary). A core with
// only one populated group counts as internally uniform: dissimilarity 0.
std::pair<SegScore, SegScore> core_vs_fua(const UrbanArea& area,
                                          const GroupScheme& scheme,
                                          const SmoothingSpec& spec,
                                          IndexKind kind = IndexKind::spatial_d);

struct VarianceDecomposition {
  double between_share = 0.0;
  double within_share = 0.0;
  bool zero_variance = false;
};

// One-way between/within decomposition of per-area values grouped by
// country label. Shares sum to 1 unless all values are identical.
VarianceDecomposition variance_decomposition(
    const std::vector<std::pair<std::string, double>>& values_by_country);

} // namespace segsca
