#include "smoothing.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace segsca {

void SmoothingSpec::validate() const {
  if (!(radius_km > 0.0) || !std::isfinite(radius_km))
    throw ValidationError("smoothing radius must be a positive real");
}

NeighborIndex::NeighborIndex(const UrbanArea& area) {
  const std::size_t n = area.cells.size();
  xs_.resize(n);
  ys_.resize(n);
  double max_x = -1e300, max_y = -1e300;
  min_x_ = 1e300;
  min_y_ = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    xs_[i] = area.cells[i].x_km;
    ys_[i] = area.cells[i].y_km;
    min_x_ = std::min(min_x_, xs_[i]);
    min_y_ = std::min(min_y_, ys_[i]);
    max_x = std::max(max_x, xs_[i]);
    max_y = std::max(max_y, ys_[i]);
  }
  nbx_ = static_cast<std::int64_t>(std::floor((max_x - min_x_) / bucket_km_)) + 1;
  nby_ = static_cast<std::int64_t>(std::floor((max_y - min_y_) / bucket_km_)) + 1;
  buckets_.resize(static_cast<std::size_t>(nbx_ * nby_));
  for (std::size_t i = 0; i < n; ++i)
    buckets_[static_cast<std::size_t>(bucket_of(xs_[i], ys_[i]))].push_back(
        static_cast<std::uint32_t>(i));
}

std::int64_t NeighborIndex::bucket_of(double x, double y) const {
  std::int64_t bx = static_cast<std::int64_t>(std::floor((x - min_x_) / bucket_km_));
  std::int64_t by = static_cast<std::int64_t>(std::floor((y - min_y_) / bucket_km_));
  bx = std::clamp<std::int64_t>(bx, 0, nbx_ - 1);
  by = std::clamp<std::int64_t>(by, 0, nby_ - 1);
  return by * nbx_ + bx;
}

std::vector<std::uint32_t> NeighborIndex::neighbors_within(
    std::size_t i, double radius_km) const {
  const double x = xs_[i];
  const double y = ys_[i];
  const double r2 = radius_km * radius_km;
  const auto lo_bx = static_cast<std::int64_t>(
      std::floor((x - radius_km - min_x_) / bucket_km_));
  const auto hi_bx = static_cast<std::int64_t>(
      std::floor((x + radius_km - min_x_) / bucket_km_));
  const auto lo_by = static_cast<std::int64_t>(
      std::floor((y - radius_km - min_y_) / bucket_km_));
  const auto hi_by = static_cast<std::int64_t>(
      std::floor((y + radius_km - min_y_) / bucket_km_));

  std::vector<std::uint32_t> out;
  for (std::int64_t by = std::max<std::int64_t>(lo_by, 0);
       by <= std::min<std::int64_t>(hi_by, nby_ - 1); ++by)
    for (std::int64_t bx = std::max<std::int64_t>(lo_bx, 0);
         bx <= std::min<std::int64_t>(hi_bx, nbx_ - 1); ++bx)
      for (std::uint32_t j : buckets_[static_cast<std::size_t>(by * nbx_ + bx)]) {
        const double dx = xs_[j] - x;
        const double dy = ys_[j] - y;
        if (dx * dx + dy * dy <= r2) out.push_back(j);
      }
  std::sort(out.begin(), out.end());
  return out;
}

LocalEnvironment smooth(const UrbanArea& area, const SmoothingSpec& spec) {
  return smooth(area, spec, NeighborIndex(area));
}

LocalEnvironment smooth(const UrbanArea& area, const SmoothingSpec& spec,
                        const NeighborIndex& index) {
  spec.validate();
  const std::size_t n = area.cells.size();
  const std::size_t g = area.group_names.size();
  LocalEnvironment env;
  env.n_cells = n;
  env.n_groups = g;
  env.smoothed_counts.assign(n * g, 0.0);
  env.smoothed_total.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto neighbours = index.neighbors_within(i, spec.radius_km);
    double* acc = env.smoothed_counts.data() + i * g;
    for (std::uint32_t j : neighbours) {
      const auto& counts = area.cells[j].counts;
      for (std::size_t k = 0; k < g; ++k) acc[k] += counts[k];
    }
    double total = 0.0;
    for (std::size_t k = 0; k < g; ++k) total += acc[k];
    env.smoothed_total[i] = total;
  }
  return env;
}

} // namespace segsca
