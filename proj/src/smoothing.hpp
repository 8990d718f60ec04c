#pragma once

#include <cstdint>
#include <vector>

#include "grid.hpp"

namespace segsca {

struct SmoothingSpec {
  double radius_km = 1.0;
  enum class Kernel { uniform_disc } kernel = Kernel::uniform_disc;
  enum class Boundary { truncate_at_area } boundary = Boundary::truncate_at_area;

  void validate() const;
};

// Uniform-grid bucket index over one area's cells. Built once per area and
// reused across radii; a query scans the bucket block covering the disc and
// returns cell indices in canonical order (so accumulation order is fixed).
class NeighborIndex {
public:
  explicit NeighborIndex(const UrbanArea& area);

  // Indices of all cells with centroid distance <= radius from cell `i`,
  // boundary inclusive, including `i` itself. Ascending order.
  std::vector<std::uint32_t> neighbors_within(std::size_t i,
                                              double radius_km) const;

  std::size_t cell_count() const { return xs_.size(); }

private:
  double bucket_km_ = 1.0;
  double min_x_ = 0.0, min_y_ = 0.0;
  std::int64_t nbx_ = 1, nby_ = 1;
  std::vector<double> xs_, ys_;
  std::vector<std::vector<std::uint32_t>> buckets_;

  std::int64_t bucket_of(double x, double y) const;
};

// Kernel-weighted local environment: per cell the smoothed per-group counts
// and their total. proportion() is tau-tilde_{pm} / tau-tilde_p; cells whose
// smoothed total is zero report proportion 0.
struct LocalEnvironment {
  std::size_t n_cells = 0;
  std::size_t n_groups = 0;
  std::vector<double> smoothed_counts; // cell-major [cell * n_groups + group]
  std::vector<double> smoothed_total;  // per cell

  double count(std::size_t cell, std::size_t group) const {
    return smoothed_counts[cell * n_groups + group];
  }
  double proportion(std::size_t cell, std::size_t group) const {
    const double t = smoothed_total[cell];
    return t > 0.0 ? count(cell, group) / t : 0.0;
  }
};

LocalEnvironment smooth(const UrbanArea& area, const SmoothingSpec& spec);
LocalEnvironment smooth(const UrbanArea& area, const SmoothingSpec& spec,
                        const NeighborIndex& index);

} // namespace segsca
