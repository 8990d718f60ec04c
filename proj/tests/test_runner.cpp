#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "digest.hpp"
#include "error.hpp"
#include "indices.hpp"
#include "runner.hpp"
#include "smoothing.hpp"

using namespace segsca;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("segsca_runner_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Two identical directory trees, byte for byte, over the listed files.
void check_same_files(const fs::path& a, const fs::path& b,
                      const std::vector<fs::path>& files) {
  for (const auto& rel : files) {
    INFO("file: ", rel.string());
    CHECK(slurp(a / rel) == slurp(b / rel));
  }
}

SynthSca small_sca(std::uint64_t seed, double effect = 0.5) {
  SynthScaConfig config;
  config.n_rows = 60;
  config.n_countries = 5;
  config.n_candidates = 3;
  config.n_subgroups = 3;
  config.n_base_controls = 1;
  config.noise_sd = 0.4;
  if (effect != 0.0) config.effects = {{"x1", effect}};
  return generate_synthetic_sca(config, seed);
}

} // namespace

TEST_CASE("tool_version is a dotted version string") {
  const std::string v = tool_version();
  CHECK_FALSE(v.empty());
  CHECK(v.find('.') != std::string::npos);
}

// -- run_indices -------------------------------------------------------------------

TEST_CASE("run_indices emits area-major rows: partition, kind, radius") {
  SynthGridConfig config;
  config.n_areas = 2;
  config.n_countries = 2;
  config.nx = 6;
  config.ny = 6;
  config.pattern = SynthPattern::random;
  const GridCollection areas = generate_synthetic_grids(config, 42);
  REQUIRE(areas.size() == 2);
  CHECK(areas[0].fua_id == "SYN0001");
  CHECK(areas[1].country != areas[0].country);

  IndicesRequest request;
  request.kinds = {IndexKind::spatial_d, IndexKind::aspatial_d,
                   IndexKind::dispersion};
  request.radii_km = {0.4, 1.0};
  const IndicesResult result = run_indices(areas, request);

  // Per area: spatial_d at two radii, aspatial_d, dispersion.
  REQUIRE(result.scores.size() == 8);
  const std::vector<std::string> expect_kind = {"spatial_D", "spatial_D",
                                                "aspatial_D", "dispersion"};
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t k = 0; k < 4; ++k) {
      const SegScore& s = result.scores[a * 4 + k];
      CHECK(s.fua_id == areas[a].fua_id);
      CHECK(s.country == areas[a].country);
      CHECK(to_string(s.kind) == expect_kind[k]);
      CHECK(s.partition == "focal"); // default: last group column
      CHECK(s.filters.label() == "none");
    }
    CHECK(result.scores[a * 4 + 0].radius_km.value() == 0.4);
    CHECK(result.scores[a * 4 + 1].radius_km.value() == 1.0);
    CHECK_FALSE(result.scores[a * 4 + 2].radius_km.has_value());
    CHECK_FALSE(result.scores[a * 4 + 3].radius_km.has_value());
  }

  // Values agree with direct calls.
  const GroupScheme scheme =
      GroupScheme::by_focal_names(areas[0].group_names, {"focal"});
  SmoothingSpec spec;
  spec.radius_km = 0.4;
  CHECK(result.scores[0].value ==
        spatial_dissimilarity(areas[0], scheme, spec).value);
  CHECK(result.scores[2].value == aspatial_indices(areas[0], scheme).first.value);
  CHECK(result.scores[3].value == population_dispersion(areas[0]).value);
}

TEST_CASE("run_indices validates requests") {
  SynthGridConfig config;
  config.nx = 4;
  config.ny = 4;
  const GridCollection areas = generate_synthetic_grids(config, 1);

  CHECK_THROWS_AS(run_indices({}, IndicesRequest{}), ValidationError);

  IndicesRequest no_kinds;
  no_kinds.kinds = {};
  CHECK_THROWS_AS(run_indices(areas, no_kinds), ValidationError);

  IndicesRequest no_radius;
  no_radius.kinds = {IndexKind::spatial_d};
  no_radius.radii_km = {};
  CHECK_THROWS_WITH_AS(run_indices(areas, no_radius),
                       doctest::Contains("radius"), ValidationError);

  IndicesRequest bad_radius;
  bad_radius.radii_km = {-1.0};
  CHECK_THROWS_AS(run_indices(areas, bad_radius), ValidationError);
}

namespace {

UrbanArea outlier_area(const std::string& fua) {
  // Five cells on a line; the middle one is a focal spike and its sex ratio
  // is far out of balance, so the outlier filter drops it.
  UrbanArea area;
  area.fua_id = fua;
  area.name = fua;
  area.country = "XX";
  area.group_names = {"reference", "focal"};
  for (int i = 0; i < 5; ++i) {
    GridCell cell;
    cell.cell_id = "c" + std::to_string(i);
    cell.x_km = static_cast<double>(i);
    cell.y_km = 0.0;
    const bool spike = i == 2;
    const double focal = spike ? 60.0 : 10.0;
    cell.counts = {100.0 - focal, focal};
    cell.male_count = spike ? 90.0 : 50.0;
    cell.female_count = spike ? 10.0 : 50.0;
    area.cells.push_back(cell);
  }
  area.finalize();
  return area;
}

UrbanArea tiny_area(const std::string& fua) {
  UrbanArea area;
  area.fua_id = fua;
  area.name = fua;
  area.country = "XX";
  area.group_names = {"reference", "focal"};
  for (int i = 0; i < 3; ++i) {
    GridCell cell;
    cell.cell_id = "c" + std::to_string(i);
    cell.x_km = static_cast<double>(i);
    cell.y_km = 0.0;
    cell.counts = {80.0, 20.0};
    area.cells.push_back(cell);
  }
  area.finalize();
  return area;
}

} // namespace

TEST_CASE("run_indices outlier filter audits removals and small-area skips") {
  const GridCollection areas = {outlier_area("A1"), tiny_area("A2")};
  IndicesRequest request;
  request.kinds = {IndexKind::spatial_d};
  request.radii_km = {0.5};
  request.filter_outliers = true;
  const IndicesResult result = run_indices(areas, request);

  REQUIRE(result.removed_cells.size() == 1);
  CHECK(result.removed_cells[0][0] == "A1");
  CHECK(result.removed_cells[0][1] == "focal");
  CHECK(result.removed_cells[0][2] == "c2");
  REQUIRE(result.filter_skipped.size() == 1);
  CHECK(result.filter_skipped[0].first == "A2");

  REQUIRE(result.scores.size() == 2);
  CHECK(result.scores[0].filters.label() == "outliers");
  CHECK(result.scores[1].filters.label() == "none"); // filter skipped

  // The filtered score equals scoring the four surviving cells directly.
  UrbanArea trimmed = outlier_area("A1");
  const GroupScheme scheme =
      GroupScheme::by_focal_names(trimmed.group_names, {"focal"});
  const OutlierFilterResult fr = filter_outlier_cells(trimmed, scheme);
  SmoothingSpec spec;
  spec.radius_km = 0.5;
  CHECK(result.scores[0].value ==
        spatial_dissimilarity(fr.area, scheme, spec).value);
}

TEST_CASE("run_indices core mode appends the core row after the full row") {
  SynthGridConfig config;
  config.nx = 8;
  config.ny = 8;
  config.pattern = SynthPattern::two_block;
  config.core_radius_km = 2.5;
  const GridCollection areas = generate_synthetic_grids(config, 9);

  IndicesRequest request;
  request.kinds = {IndexKind::spatial_d};
  request.radii_km = {1.0};
  request.core = true;
  const IndicesResult result = run_indices(areas, request);
  REQUIRE(result.scores.size() == 2);
  CHECK(result.scores[0].filters.label() == "none");
  CHECK(result.scores[1].filters.label() == "core");
  CHECK(result.scores[0].fua_id == result.scores[1].fua_id);

  const GroupScheme scheme =
      GroupScheme::by_focal_names(areas[0].group_names, {"focal"});
  SmoothingSpec spec;
  spec.radius_km = 1.0;
  const auto [full, core] = core_vs_fua(areas[0], scheme, spec,
                                        IndexKind::spatial_d);
  CHECK(result.scores[0].value == full.value);
  CHECK(result.scores[1].value == core.value);
}

TEST_CASE("run_indices multi-partition requests nest partitions inside areas") {
  UrbanArea area;
  area.fua_id = "P1";
  area.name = "P1";
  area.country = "XX";
  area.group_names = {"g1", "g2", "g3"};
  for (int i = 0; i < 2; ++i) {
    GridCell cell;
    cell.cell_id = "c" + std::to_string(i);
    cell.x_km = static_cast<double>(i);
    cell.y_km = 0.0;
    cell.counts = {50.0, 30.0 + 10 * i, 20.0};
    area.cells.push_back(cell);
  }
  area.finalize();

  IndicesRequest request;
  request.kinds = {IndexKind::aspatial_d};
  request.partitions = {{"g2"}, {"g2", "g3"}};
  const IndicesResult result = run_indices({area}, request);
  REQUIRE(result.scores.size() == 2);
  CHECK(result.scores[0].partition == "g2");
  CHECK(result.scores[1].partition == "g2+g3");
}

TEST_CASE("write_scores_csv layout") {
  const fs::path dir = temp_dir("scores");
  SegScore spatial;
  spatial.fua_id = "F1";
  spatial.country = "AT";
  spatial.kind = IndexKind::spatial_d;
  spatial.radius_km = 0.5;
  spatial.partition = "focal";
  spatial.value = 0.25;
  SegScore aspatial;
  aspatial.fua_id = "F1";
  aspatial.country = "AT";
  aspatial.kind = IndexKind::aspatial_p;
  aspatial.partition = "focal";
  aspatial.filters.outliers_removed = true;
  aspatial.value = 0.5;

  const fs::path path = dir / "scores.csv";
  write_scores_csv({spatial, aspatial}, path);
  CHECK(slurp(path) ==
        "fua_id,country,index,radius_km,partition,filters,value\n"
        "F1,AT,spatial_D,0.5,focal,none,0.25\n"
        "F1,AT,aspatial_P,,focal,outliers,0.5\n");
}

// -- run_sca -----------------------------------------------------------------------

TEST_CASE("run_sca writes per-variable results plus the robustness table") {
  const SynthSca synth = small_sca(11);
  ScaRequest request;
  request.replications = 20;
  request.seed = 7;

  const fs::path dir = temp_dir("sca_files");
  const ScaRunResult result = run_sca(synth.catalog, synth.table, request, dir);

  CHECK(result.n_specs_enumerated ==
        enumerate_specs(synth.catalog, request.limits, request.estimator).size());
  CHECK(result.rows_used == 60);
  REQUIRE(result.summaries.size() == 3);
  CHECK(result.summaries[0].meta.name == "x1");
  CHECK(result.summaries[0].dominant_sign == 1);
  CHECK(result.summaries[0].test1.status == TestStatus::pass);

  const std::vector<fs::path> expected = {
      "curve_x1.json", "curve_x1.csv", "curve_x2.json", "curve_x2.csv",
      "curve_x3.json", "curve_x3.csv", "robustness.csv"};
  CHECK(result.files == expected);
  for (const auto& rel : expected) CHECK(fs::exists(dir / rel));

  const auto j = nlohmann::ordered_json::parse(slurp(dir / "curve_x1.json"));
  CHECK(j["variable"] == "x1");
  CHECK(j["outcome"] == "seg_d");
  CHECK(j["n_specs"].get<std::size_t>() == result.summaries[0].n_specs);
  CHECK(j["bootstrap"]["replications"] == 20);
  CHECK(j["specs"].size() == result.summaries[0].n_specs);
  CHECK(j["band"].size() == result.summaries[0].n_specs);

  // Plot CSV has one row per valid spec, ranks 1..K.
  std::istringstream plot(slurp(dir / "curve_x1.csv"));
  std::string line;
  std::getline(plot, line);
  CHECK(line == "rank,observed,band_lo,band_hi");
  std::size_t rows = 0;
  while (std::getline(plot, line))
    if (!line.empty()) ++rows;
  CHECK(rows == result.summaries[0].n_specs - result.summaries[0].n_invalid);
}

TEST_CASE("run_sca reruns are byte-identical, whatever the worker count") {
  const SynthSca synth = small_sca(23);
  ScaRequest request;
  request.replications = 12;
  request.seed = 99;

  const fs::path dir1 = temp_dir("sca_det1");
  const fs::path dir2 = temp_dir("sca_det2");
  const fs::path dir4 = temp_dir("sca_det4");
  const ScaRunResult r1 = run_sca(synth.catalog, synth.table, request, dir1);
  const ScaRunResult r2 = run_sca(synth.catalog, synth.table, request, dir2);
  request.threads = 4;
  const ScaRunResult r4 = run_sca(synth.catalog, synth.table, request, dir4);

  REQUIRE(r1.files == r2.files);
  REQUIRE(r1.files == r4.files);
  check_same_files(dir1, dir2, r1.files);
  check_same_files(dir1, dir4, r1.files);
}

TEST_CASE("run_sca audits imputed cells") {
  SynthSca synth = small_sca(31);
  synth.table.values(4, synth.table.require_column("x2")) = std::nan("");
  synth.table.values(9, synth.table.require_column("x2")) = std::nan("");

  ScaRequest request;
  request.replications = 5;
  request.seed = 1;

  const fs::path dir = temp_dir("sca_impute");
  const ScaRunResult result = run_sca(synth.catalog, synth.table, request, dir);
  CHECK(result.missing_report.imputed.size() == 2);
  CHECK(result.rows_used == 60);
  CHECK(std::count(result.files.begin(), result.files.end(),
                   fs::path("imputed_cells.csv")) == 1);
  std::istringstream in(slurp(dir / "imputed_cells.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "fua_id,column,imputed_value");

  // Dropping instead shrinks the table and writes no imputation audit.
  ScaRequest drop = request;
  drop.missing = MissingPolicy::drop_rows;
  const fs::path dir2 = temp_dir("sca_drop");
  const ScaRunResult dropped = run_sca(synth.catalog, synth.table, drop, dir2);
  CHECK(dropped.missing_report.dropped_rows == 2);
  CHECK(dropped.rows_used == 58);
  CHECK_FALSE(fs::exists(dir2 / "imputed_cells.csv"));
}

TEST_CASE("run_sca audits invalid specifications") {
  // One candidate is constant within every country, so specs containing it
  // are dropped with a reason instead of silently skewing the curve.
  SynthSca synth = small_sca(47);
  const std::size_t col = synth.table.require_column("x3");
  std::map<std::string, double> level;
  for (std::size_t i = 0; i < synth.table.row_ids.size(); ++i) {
    auto [it, inserted] = level.emplace(synth.table.country[i],
                                        static_cast<double>(level.size()));
    synth.table.values(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(col)) = it->second;
  }

  ScaRequest request;
  request.replications = 4;
  request.seed = 2;
  request.focal_variables = {"x1"};

  const fs::path dir = temp_dir("sca_invalid");
  const ScaRunResult result = run_sca(synth.catalog, synth.table, request, dir);
  REQUIRE(result.summaries.size() == 1);
  CHECK(result.summaries[0].n_invalid > 0);
  REQUIRE(std::count(result.files.begin(), result.files.end(),
                     fs::path("invalid_specs.csv")) == 1);
  std::istringstream in(slurp(dir / "invalid_specs.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "variable,spec_id,covariates,reason");
  std::getline(in, line);
  CHECK(line.find("x3") != std::string::npos);
}

TEST_CASE("run_sca validates catalog-table agreement") {
  SynthSca synth = small_sca(3);
  Catalog extra = synth.catalog;
  VariableMeta ghost;
  ghost.name = "ghost";
  ghost.level = VarLevel::fua;
  ghost.group = "fua";
  ghost.subgroup = "sg9";
  ghost.role = VarRole::candidate;
  extra.vars.push_back(ghost);

  const fs::path dir = temp_dir("sca_ghost");
  ScaRequest request;
  CHECK_THROWS_WITH_AS(run_sca(extra, synth.table, request, dir),
                       doctest::Contains("ghost"), SchemaError);
}

TEST_CASE("run_sca rejects country-level columns that vary within a country") {
  SynthScaConfig config;
  config.n_rows = 30;
  config.n_countries = 3;
  config.n_candidates = 2;
  config.n_subgroups = 2;
  config.n_country_candidates = 1;
  config.n_country_subgroups = 1;
  SynthSca synth = generate_synthetic_sca(config, 8);

  const std::size_t col = synth.table.require_column("z1");
  synth.table.values(0, static_cast<Eigen::Index>(col)) += 1.0;

  const fs::path dir = temp_dir("sca_country");
  ScaRequest request;
  request.estimator = Estimator::random_intercept;
  CHECK_THROWS_WITH_AS(run_sca(synth.catalog, synth.table, request, dir),
                       doctest::Contains("varies within country"),
                       ValidationError);
}

TEST_CASE("run_sca validates focal variable names") {
  const SynthSca synth = small_sca(4);
  const fs::path dir = temp_dir("sca_focal");
  ScaRequest request;
  request.focal_variables = {"nope"};
  CHECK_THROWS_WITH_AS(run_sca(synth.catalog, synth.table, request, dir),
                       doctest::Contains("not in the catalog"), ValidationError);
  request.focal_variables = {"b1"};
  CHECK_THROWS_WITH_AS(run_sca(synth.catalog, synth.table, request, dir),
                       doctest::Contains("not a candidate"), ValidationError);
}

// -- synthetic SCA data --------------------------------------------------------------

TEST_CASE("synthetic country candidates are constant within country") {
  SynthScaConfig config;
  config.n_rows = 40;
  config.n_countries = 4;
  config.n_candidates = 2;
  config.n_subgroups = 2;
  config.n_country_candidates = 2;
  config.n_country_subgroups = 2;
  const SynthSca synth = generate_synthetic_sca(config, 77);

  for (const std::string name : {"z1", "z2"}) {
    const std::size_t col = synth.table.require_column(name);
    std::map<std::string, double> seen;
    for (std::size_t i = 0; i < synth.table.row_ids.size(); ++i) {
      const double v = synth.table.values(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(col));
      auto [it, inserted] = seen.emplace(synth.table.country[i], v);
      CHECK(it->second == v);
    }
    CHECK(seen.size() == 4);
  }
  // And they are country-level candidates in the catalog.
  CHECK(synth.catalog.find("z1")->level == VarLevel::country);
  CHECK(synth.catalog.find("z1")->role == VarRole::country_candidate);
}

TEST_CASE("synthetic sca rejects unknown effect names") {
  SynthScaConfig config;
  config.effects = {{"x99", 1.0}};
  CHECK_THROWS_WITH_AS(generate_synthetic_sca(config, 1),
                       doctest::Contains("x99"), ValidationError);
}

TEST_CASE("synthetic sca honours caller-supplied rows") {
  const std::vector<std::string> ids = {"A", "B", "C", "D"};
  const std::vector<std::string> countries = {"X", "X", "Y", "Y"};
  SynthScaConfig config;
  config.n_candidates = 2;
  config.n_subgroups = 2;
  const SynthSca synth = generate_synthetic_sca(config, 5, &ids, &countries);
  CHECK(synth.table.row_ids == ids);
  CHECK(synth.table.country == countries);

  CHECK_THROWS_AS(generate_synthetic_sca(config, 5, &ids, nullptr),
                  ValidationError);
}

// -- interpolate -------------------------------------------------------------------

TEST_CASE("run_interpolate distributes zones onto the target grid") {
  const fs::path dir = temp_dir("interp");
  std::ofstream(dir / "zones.csv") << "zone_id,pop_a,pop_b\n"
                                      "Z1,100,50\n"
                                      "Z2,40,0\n";
  std::ofstream(dir / "members.csv") << "zone_id,fine_cell_id,weight\n"
                                        "Z1,f1,30\n"
                                        "Z1,f2,70\n"
                                        "Z2,f3,10\n";
  std::ofstream(dir / "mapping.csv") << "fine_cell_id,target_cell_id\n"
                                        "f1,t1\n"
                                        "f2,t2\n"
                                        "f3,t1\n";
  const fs::path out = dir / "out.csv";
  run_interpolate(dir / "zones.csv", dir / "members.csv", dir / "mapping.csv",
                  out);
  CHECK(slurp(out) ==
        "target_cell_id,pop_a,pop_b\n"
        "t1,70,15\n"
        "t2,70,35\n");
}

TEST_CASE("run_interpolate rejects inconsistent membership files") {
  const fs::path dir = temp_dir("interp_err");
  std::ofstream(dir / "zones.csv") << "zone_id,pop_a\nZ1,100\n";
  std::ofstream(dir / "mapping.csv") << "fine_cell_id,target_cell_id\nf1,t1\n";

  std::ofstream(dir / "dup.csv") << "zone_id,fine_cell_id,weight\n"
                                    "Z1,f1,30\n"
                                    "Z1,f1,70\n";
  CHECK_THROWS_WITH_AS(run_interpolate(dir / "zones.csv", dir / "dup.csv",
                                       dir / "mapping.csv", dir / "o.csv"),
                       doctest::Contains("duplicate member"), ValidationError);

  std::ofstream(dir / "ghost.csv") << "zone_id,fine_cell_id,weight\n"
                                      "Z9,f1,30\n";
  CHECK_THROWS_WITH_AS(run_interpolate(dir / "zones.csv", dir / "ghost.csv",
                                       dir / "mapping.csv", dir / "o.csv"),
                       doctest::Contains("Z9"), ValidationError);
}

// -- manifest ----------------------------------------------------------------------

TEST_CASE("write_manifest digests every output") {
  const fs::path dir = temp_dir("manifest");
  std::ofstream(dir / "a.csv") << "h\n1\n";
  std::ofstream(dir / "b.csv") << "h\n2\n";

  RunManifest manifest;
  manifest.command = "indices";
  manifest.inputs = {{"grid.csv", "deadbeef"}};
  manifest.master_seed = 42;
  manifest.tool_version = tool_version();
  manifest.wall_clock_seconds = 1.25;
  manifest.details["n_areas"] = 3;
  write_manifest(manifest, dir, {"a.csv", "b.csv"});

  const auto j = nlohmann::ordered_json::parse(slurp(dir / "manifest.json"));
  CHECK(j["command"] == "indices");
  CHECK(j["config_digest"] == "-");
  CHECK(j["inputs"]["grid.csv"] == "deadbeef");
  CHECK(j["master_seed"] == 42);
  CHECK(j["tool_version"] == tool_version());
  CHECK(j["details"]["n_areas"] == 3);
  CHECK(j["outputs"]["a.csv"] == Sha256::of_file(dir / "a.csv"));
  CHECK(j["outputs"]["b.csv"] == Sha256::of_file(dir / "b.csv"));

  RunManifest unseeded;
  unseeded.command = "interpolate";
  unseeded.tool_version = tool_version();
  write_manifest(unseeded, dir, {});
  const auto j2 = nlohmann::ordered_json::parse(slurp(dir / "manifest.json"));
  CHECK(j2["master_seed"].is_null());
  CHECK(j2["outputs"].empty());
}
