#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace segsca {

// One 1x1 km population cell. counts[] is aligned with the owning area's
// group_names. Sex counts are optional (only some sources publish them).
struct GridCell {
  std::string cell_id;
  double x_km = 0.0;
  double y_km = 0.0;
  std::vector<double> counts;
  std::optional<double> male_count;
  std::optional<double> female_count;

  double total() const;
};

// Binary partition of the group list into focal and reference sets. Focal
// and reference must both be non-empty and together cover every group.
struct GroupScheme {
  std::vector<std::string> groups;
  std::vector<std::size_t> focal;

  static GroupScheme by_focal_names(const std::vector<std::string>& groups,
                                    const std::vector<std::string>& focal_names);
  void validate() const;
  bool is_focal(std::size_t group_idx) const;
  std::string partition_label() const;
};

struct UrbanArea {
  std::string fua_id;
  std::string name;
  std::string country;
  std::vector<std::string> group_names;
  // Cells are kept in canonical (x_km, y_km) order so every downstream
  // reduction is independent of input row order.
  std::vector<GridCell> cells;
  std::vector<std::uint8_t> core_mask; // empty when no core information

  double total_population() const;
  double group_total(std::size_t group_idx) const;
  double focal_total(const GroupScheme& scheme) const;
  bool has_core() const;
  UrbanArea core_subarea() const;

  // Sorts cells canonically and checks the type invariants.
  void finalize();
};

using GridCollection = std::vector<UrbanArea>;

struct GridSchema {
  std::string fua_id = "fua_id";
  std::string fua_name = "fua_name";
  std::string country = "country";
  std::string x_km = "x_km";
  std::string y_km = "y_km";
  // Empty means: every column starting with this prefix, in header order.
  std::vector<std::string> group_columns;
  std::string group_prefix = "pop_";
  std::string male = "male";
  std::string female = "female";
  std::string core_flag = "core_flag";
};

GridCollection ingest_grid(const std::filesystem::path& path,
                           const GridSchema& schema = {});
void write_grid(const GridCollection& areas, const std::filesystem::path& path,
                const GridSchema& schema = {});

// -- dasymetric interpolation ------------------------------------------------

struct SourceZone {
  struct Member {
    std::string fine_cell_id;
    double weight = 0.0;
  };
  std::string zone_id;
  std::vector<double> counts; // aligned with a caller-supplied group list
  std::vector<Member> members;
};

// Splits each zone's counts over its member fine cells proportionally to
// weight, then sums fine cells into target cells via fine_to_target.
// Result is keyed by target cell id; vectors align with the zone group list.
std::map<std::string, std::vector<double>> dasymetric_interpolate(
    const std::vector<SourceZone>& zones,
    const std::map<std::string, std::string>& fine_to_target);

// -- outlier cell filter -------------------------------------------------

struct OutlierFilterResult {
  UrbanArea area;
  std::vector<std::string> removed_cell_ids;
  bool skipped_small_area = false; // fewer than 5 cells: filter not applied
};

// Drops cells whose focal share is >= 0.5 and that either have at least a
// 5-fold focal share relative to the mean of their 4 nearest cells or at
// least twice as many male as female residents (when sex counts exist).
OutlierFilterResult filter_outlier_cells(const UrbanArea& area,
                                         const GroupScheme& scheme);

// -- synthetic cities ------------------------------------------------------

enum class SynthPattern { uniform, radial_gradient, two_block, random };

SynthPattern synth_pattern_from_string(const std::string& name);
std::string to_string(SynthPattern p);

struct SynthCityConfig {
  int nx = 10;
  int ny = 10;
  double cell_km = 1.0;
  double total_population = 10000.0;
  double focal_share = 0.2;
  SynthPattern pattern = SynthPattern::uniform;
  std::string fua_id = "SYN001";
  std::string name = "synthetic";
  std::string country = "SY";
  std::vector<std::string> group_names = {"reference", "focal"};
  std::size_t focal_group = 1;
  // Cells within this many km of the grid centre get the core flag; <= 0
  // disables core information.
  double core_radius_km = 0.0;
};

UrbanArea generate_synthetic_city(const SynthCityConfig& config,
                                  std::uint64_t seed);

} // namespace segsca
