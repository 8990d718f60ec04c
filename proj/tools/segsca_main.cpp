// Command-line front end. Everything analytical happens behind the C API of
// the shared engine library; this file only parses flags, moves files, and
// writes the run manifest.

#include <segsca/segsca.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using nlohmann::ordered_json;

int exit_code_for(int status) {
  switch (status) {
    case SEGSCA_OK:
      return 0;
    case SEGSCA_ERR_VALIDATION:
    case SEGSCA_ERR_IO:
      return 1; // bad inputs
    default:
      return 2; // numeric or internal failure
  }
}

int fail(int status) {
  std::fprintf(stderr, "error: %s\n", segsca_last_error());
  return exit_code_for(status);
}

struct GridDeleter {
  void operator()(segsca_grid* g) const { segsca_grid_free(g); }
};
using GridPtr = std::unique_ptr<segsca_grid, GridDeleter>;

struct ResultDeleter {
  void operator()(segsca_result* r) const { segsca_result_free(r); }
};
using ResultPtr = std::unique_ptr<segsca_result, ResultDeleter>;

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back(sep);
    out += p;
  }
  return out;
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

int write_manifest(const std::string& output_dir, const std::string& command,
                   const std::string& config_path,
                   const std::vector<std::string>& inputs,
                   const std::uint64_t* seed, const ordered_json& details,
                   const std::vector<std::string>& outputs, double seconds) {
  std::vector<const char*> input_ptrs, output_ptrs;
  for (const auto& s : inputs) input_ptrs.push_back(s.c_str());
  for (const auto& s : outputs) output_ptrs.push_back(s.c_str());
  const std::string details_str = details.dump();
  return segsca_manifest_write(
      output_dir.c_str(), command.c_str(),
      config_path.empty() ? nullptr : config_path.c_str(), input_ptrs.data(),
      input_ptrs.size(), seed, details_str.c_str(), output_ptrs.data(),
      output_ptrs.size(), seconds);
}

// One value per subcommand; set_config wires --config into each.
struct IndicesArgs {
  std::string input;
  std::string output_dir;
  std::vector<std::string> kinds;
  std::vector<double> radii;
  std::vector<std::string> partitions; // each entry: comma list of focal groups
  bool filter_outliers = false;
  bool core = false;
  int threads = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config_path;
};

int cmd_indices(const IndicesArgs& args, const std::string& command) {
  Stopwatch timer;
  segsca_grid* grid_raw = nullptr;
  if (int rc = segsca_grid_read(args.input.c_str(), &grid_raw)) return fail(rc);
  GridPtr grid(grid_raw);

  segsca_indices_opts opts;
  segsca_indices_opts_init(&opts);
  const std::string kinds =
      args.kinds.empty() ? "spatial_D" : join(args.kinds, ',');
  opts.kinds = kinds.c_str();
  std::vector<double> radii = args.radii.empty()
                                  ? std::vector<double>{1.0}
                                  : args.radii;
  opts.radii_km = radii.data();
  opts.n_radii = radii.size();
  const std::string partitions = join(args.partitions, ';');
  if (!partitions.empty()) opts.partitions = partitions.c_str();
  opts.filter_outliers = args.filter_outliers ? 1 : 0;
  opts.core = args.core ? 1 : 0;
  opts.threads = args.threads;

  segsca_result* result_raw = nullptr;
  if (int rc = segsca_indices_run(grid.get(), &opts, &result_raw))
    return fail(rc);
  ResultPtr result(result_raw);

  const std::filesystem::path out_dir(args.output_dir);
  std::vector<std::string> outputs = {"scores.csv"};
  if (int rc = segsca_result_write_scores(result.get(),
                                          (out_dir / "scores.csv").c_str()))
    return fail(rc);
  if (segsca_result_removed_count(result.get()) > 0) {
    if (int rc = segsca_result_write_removed(
            result.get(), (out_dir / "removed_cells.csv").c_str()))
      return fail(rc);
    outputs.push_back("removed_cells.csv");
  }
  if (segsca_result_skipped_count(result.get()) > 0) {
    if (int rc = segsca_result_write_skipped(
            result.get(), (out_dir / "filter_skipped.csv").c_str()))
      return fail(rc);
    outputs.push_back("filter_skipped.csv");
  }

  ordered_json details;
  details["areas"] = segsca_grid_area_count(grid.get());
  details["scores"] = segsca_result_score_count(result.get());
  details["removed_cells"] = segsca_result_removed_count(result.get());
  details["filter_skipped"] = segsca_result_skipped_count(result.get());
  if (int rc = write_manifest(args.output_dir, command, args.config_path,
                              {args.input}, args.seed_set ? &args.seed : nullptr,
                              details, outputs, timer.seconds()))
    return fail(rc);
  return 0;
}

struct ScaArgs {
  std::string input;
  std::string catalog;
  std::string output_dir;
  std::string estimator = "fixed_effects";
  int min_focal = 1;
  int max_focal = 4;
  int min_country = 0;
  int max_country = 3;
  std::vector<std::string> focal;
  std::uint64_t replications = 500;
  std::uint64_t seed = 0;
  std::string missing = "mean";
  bool standardize = true;
  int threads = 1;
  std::string config_path;
};

int cmd_sca(const ScaArgs& args, const std::string& command) {
  Stopwatch timer;
  segsca_sca_opts opts;
  segsca_sca_opts_init(&opts);
  opts.estimator = args.estimator.c_str();
  opts.min_focal = args.min_focal;
  opts.max_focal = args.max_focal;
  opts.min_country = args.min_country;
  opts.max_country = args.max_country;
  const std::string focal = join(args.focal, ',');
  if (!focal.empty()) opts.focal = focal.c_str();
  opts.replications = args.replications;
  opts.seed = args.seed;
  opts.missing = args.missing.c_str();
  opts.standardize = args.standardize ? 1 : 0;
  opts.threads = args.threads;

  char* info_raw = nullptr;
  if (int rc = segsca_sca_run(args.catalog.c_str(), args.input.c_str(), &opts,
                              args.output_dir.c_str(), &info_raw))
    return fail(rc);
  std::unique_ptr<char[], void (*)(char*)> info(info_raw, segsca_string_free);

  const ordered_json parsed = ordered_json::parse(info.get());
  std::vector<std::string> outputs;
  for (const auto& f : parsed.at("files"))
    outputs.push_back(f.get<std::string>());

  ordered_json details;
  details["estimator"] = parsed.at("estimator");
  details["n_specs_enumerated"] = parsed.at("n_specs_enumerated");
  details["rows_used"] = parsed.at("rows_used");
  details["dropped_rows"] = parsed.at("dropped_rows");
  details["imputed_cells"] = parsed.at("imputed_cells");
  details["replications"] = args.replications;
  details["variables"] = parsed.at("variables");
  if (int rc = write_manifest(args.output_dir, command, args.config_path,
                              {args.input, args.catalog}, &args.seed, details,
                              outputs, timer.seconds()))
    return fail(rc);
  return 0;
}

struct SynthArgs {
  std::string output_dir;
  std::uint64_t seed = 0;
  // grid
  std::size_t areas = 1;
  std::size_t countries = 1;
  int nx = 10;
  int ny = 10;
  double cell_km = 1.0;
  double population = 10000.0;
  double focal_share = 0.2;
  std::string pattern = "random";
  double core_radius = 0.0;
  // covariates
  std::size_t candidates = 8;
  std::size_t subgroups = 4;
  std::size_t country_candidates = 0;
  std::size_t country_subgroups = 0;
  std::size_t base_controls = 1;
  std::string outcome_name = "seg_d";
  std::vector<std::string> effects; // name=value
  double noise_sd = 1.0;
  double country_sd = 0.5;
  std::string config_path;
};

int cmd_synth(const SynthArgs& args, const std::string& command) {
  Stopwatch timer;
  segsca_synth_grid_opts grid_opts;
  segsca_synth_grid_opts_init(&grid_opts);
  grid_opts.n_areas = args.areas;
  grid_opts.n_countries = args.countries;
  grid_opts.nx = args.nx;
  grid_opts.ny = args.ny;
  grid_opts.cell_km = args.cell_km;
  grid_opts.total_population = args.population;
  grid_opts.focal_share = args.focal_share;
  grid_opts.pattern = args.pattern.c_str();
  grid_opts.core_radius_km = args.core_radius;

  segsca_grid* grid_raw = nullptr;
  if (int rc = segsca_grid_synth(&grid_opts, args.seed, &grid_raw))
    return fail(rc);
  GridPtr grid(grid_raw);

  const std::filesystem::path out_dir(args.output_dir);
  if (int rc = segsca_grid_write(grid.get(), (out_dir / "grid.csv").c_str()))
    return fail(rc);

  segsca_synth_sca_opts sca_opts;
  segsca_synth_sca_opts_init(&sca_opts);
  sca_opts.n_candidates = args.candidates;
  sca_opts.n_subgroups = args.subgroups;
  sca_opts.n_country_candidates = args.country_candidates;
  sca_opts.n_country_subgroups = args.country_subgroups;
  sca_opts.n_base_controls = args.base_controls;
  sca_opts.outcome = args.outcome_name.c_str();
  const std::string effects = join(args.effects, ',');
  if (!effects.empty()) sca_opts.effects = effects.c_str();
  sca_opts.noise_sd = args.noise_sd;
  sca_opts.country_sd = args.country_sd;
  if (int rc = segsca_synth_sca_write(grid.get(), &sca_opts, args.seed,
                                      (out_dir / "covariates.csv").c_str(),
                                      (out_dir / "catalog.csv").c_str()))
    return fail(rc);

  ordered_json details;
  details["areas"] = args.areas;
  details["pattern"] = args.pattern;
  details["candidates"] = args.candidates;
  if (int rc = write_manifest(args.output_dir, command, args.config_path, {},
                              &args.seed, details,
                              {"grid.csv", "covariates.csv", "catalog.csv"},
                              timer.seconds()))
    return fail(rc);
  return 0;
}

struct InterpolateArgs {
  std::string zones;
  std::string members;
  std::string mapping;
  std::string output_dir;
  std::string config_path;
};

int cmd_interpolate(const InterpolateArgs& args, const std::string& command) {
  Stopwatch timer;
  const std::filesystem::path out_dir(args.output_dir);
  if (int rc = segsca_interpolate(args.zones.c_str(), args.members.c_str(),
                                  args.mapping.c_str(),
                                  (out_dir / "interpolated.csv").c_str()))
    return fail(rc);
  if (int rc = write_manifest(args.output_dir, command, args.config_path,
                              {args.zones, args.members, args.mapping}, nullptr,
                              ordered_json::object(), {"interpolated.csv"},
                              timer.seconds()))
    return fail(rc);
  return 0;
}

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// CLI11 only reads config files registered on the root command, so the
// per-subcommand --config is expanded before parsing: every key=value line
// becomes a --key=value token injected right after the subcommand name.
// Keys already given on the command line are skipped, so explicit options
// win. Space-separated values repeat the option; [section] headers and
// #/; comments are ignored.
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);

  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));

  std::vector<std::string> extra;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.erase(cut);
    const std::string entry = trim_copy(line);
    if (entry.empty() || entry.front() == '[') continue;
    const std::size_t eq = entry.find('=');
    const std::string key =
        eq == std::string::npos ? std::string() : trim_copy(entry.substr(0, eq));
    if (key.empty())
      throw CLI::FileError(path + " line " + std::to_string(line_no) +
                           ": expected key=value");
    if (given.count("--" + key)) continue;
    const std::string value = trim_copy(entry.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      extra.push_back("--" + key + "=" + value.substr(1, value.size() - 2));
    } else if (value.empty()) {
      extra.push_back("--" + key + "=");
    } else {
      std::istringstream parts(value);
      std::string piece;
      while (parts >> piece) extra.push_back("--" + key + "=" + piece);
    }
  }

  // Insert after the subcommand token so the options land in its scope.
  auto at = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return a.empty() || a.front() != '-';
  });
  if (at != args.end()) ++at;
  args.insert(at, extra.begin(), extra.end());
  return args;
}

} // namespace

int main(int argc, char** argv) {
  std::vector<std::string> argv_parts(argv, argv + argc);
  const std::string command = join(argv_parts, ' ');

  CLI::App app{std::string(segsca_version()) +
                   " — segregation indices and specification-curve analysis "
                   "over gridded population data",
               "segsca"};
  app.require_subcommand(1);

  IndicesArgs ind;
  auto* indices = app.add_subcommand(
      "indices", "Compute segregation indices for every urban area");
  indices->add_option("--input", ind.input, "grid CSV")->required();
  indices->add_option("--output-dir", ind.output_dir, "output directory")
      ->required();
  indices->add_option("--index", ind.kinds,
                      "index kind (repeatable): spatial-d, spatial-p, "
                      "aspatial-d, aspatial-p, dispersion");
  indices->add_option("--radius", ind.radii,
                      "smoothing radius in km (repeatable)");
  indices->add_option("--focal-groups", ind.partitions,
                      "comma list of focal group columns; repeat for several "
                      "partitions (default: last group column)");
  indices->add_flag("--filter-outliers", ind.filter_outliers,
                    "drop outlier cells before scoring");
  indices->add_flag("--core", ind.core, "also score each FUA's core subarea");
  indices->add_option("--threads", ind.threads, "worker threads");
  auto* ind_seed = indices->add_option("--seed", ind.seed,
                                       "recorded in the manifest; no effect");
  indices->add_option("--config", ind.config_path,
                    "key=value defaults for this subcommand "
                    "(explicit options win)");

  ScaArgs sca;
  auto* sca_cmd = app.add_subcommand(
      "sca", "Specification-curve analysis with counterfactual bootstrap");
  sca_cmd->add_option("--input", sca.input, "covariate CSV")->required();
  sca_cmd->add_option("--catalog", sca.catalog, "variable catalog CSV")
      ->required();
  sca_cmd->add_option("--output-dir", sca.output_dir, "output directory")
      ->required();
  sca_cmd->add_option("--seed", sca.seed, "master seed (all randomness)")
      ->required();
  sca_cmd->add_option("--reps", sca.replications,
                      "bootstrap replications; 0 skips tests 2 and 3");
  sca_cmd->add_option("--estimator", sca.estimator,
                      "fixed_effects or random_intercept (alias multilevel)");
  sca_cmd->add_option("--min-focal", sca.min_focal, "min focal candidates");
  sca_cmd->add_option("--max-focal", sca.max_focal, "max focal candidates");
  sca_cmd->add_option("--min-country", sca.min_country,
                      "min country candidates (random intercept)");
  sca_cmd->add_option("--max-country", sca.max_country,
                      "max country candidates (random intercept)");
  sca_cmd->add_option("--focal", sca.focal,
                      "focal variable (repeatable; default: every candidate)");
  sca_cmd->add_option("--missing", sca.missing,
                      "missing-data policy: mean or drop");
  sca_cmd->add_flag("--standardize,!--no-standardize", sca.standardize,
                    "z-score covariates before fitting (default on)");
  sca_cmd->add_option("--threads", sca.threads, "worker threads");
  sca_cmd->add_option("--config", sca.config_path,
                    "key=value defaults for this subcommand "
                    "(explicit options win)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Write synthetic grid, covariate, and catalog files");
  synth_cmd->add_option("--output-dir", synth.output_dir, "output directory")
      ->required();
  synth_cmd->add_option("--seed", synth.seed, "master seed (default 0)");
  synth_cmd->add_option("--areas", synth.areas, "number of urban areas");
  synth_cmd->add_option("--countries", synth.countries, "number of countries");
  synth_cmd->add_option("--nx", synth.nx, "grid columns");
  synth_cmd->add_option("--ny", synth.ny, "grid rows");
  synth_cmd->add_option("--cell-km", synth.cell_km, "cell size in km");
  synth_cmd->add_option("--population", synth.population,
                        "total population per area");
  synth_cmd->add_option("--focal-share", synth.focal_share,
                        "focal group share of the population");
  synth_cmd->add_option("--pattern", synth.pattern,
                        "uniform, radial-gradient, two-block, or random");
  synth_cmd->add_option("--core-radius", synth.core_radius,
                        "core radius in km (0: no core flags)");
  synth_cmd->add_option("--candidates", synth.candidates,
                        "number of candidate covariates");
  synth_cmd->add_option("--subgroups", synth.subgroups,
                        "number of candidate subgroups");
  synth_cmd->add_option("--country-candidates", synth.country_candidates,
                        "number of country-level candidates");
  synth_cmd->add_option("--country-subgroups", synth.country_subgroups,
                        "number of country-candidate subgroups");
  synth_cmd->add_option("--base-controls", synth.base_controls,
                        "number of base control covariates");
  synth_cmd->add_option("--outcome-name", synth.outcome_name,
                        "name of the outcome column");
  synth_cmd->add_option("--effect", synth.effects,
                        "true effect name=value (repeatable)");
  synth_cmd->add_option("--noise-sd", synth.noise_sd, "outcome noise sd");
  synth_cmd->add_option("--country-sd", synth.country_sd,
                        "country intercept sd");
  synth_cmd->add_option("--config", synth.config_path,
                      "key=value defaults for this subcommand "
                      "(explicit options win)");

  InterpolateArgs interp;
  auto* interp_cmd = app.add_subcommand(
      "interpolate", "Dasymetric interpolation of zone counts onto a grid");
  interp_cmd->add_option("--input", interp.zones, "zone counts CSV")->required();
  interp_cmd->add_option("--members", interp.members,
                         "zone membership CSV (zone_id, fine_cell_id, weight)")
      ->required();
  interp_cmd->add_option("--mapping", interp.mapping,
                         "fine-to-target cell mapping CSV")
      ->required();
  interp_cmd->add_option("--output-dir", interp.output_dir, "output directory")
      ->required();
  interp_cmd->add_option("--config", interp.config_path,
                       "key=value defaults for this subcommand "
                       "(explicit options win)");

  try {
    std::vector<std::string> args(argv_parts.begin() + 1, argv_parts.end());
    args = expand_config_args(std::move(args));
    std::reverse(args.begin(), args.end()); // CLI11 takes reversed args
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1; // flag/usage problems are validation errors
  }

  if (app.got_subcommand(indices)) {
    ind.seed_set = ind_seed->count() > 0;
    return cmd_indices(ind, command);
  }
  if (app.got_subcommand(sca_cmd)) return cmd_sca(sca, command);
  if (app.got_subcommand(synth_cmd)) return cmd_synth(synth, command);
  if (app.got_subcommand(interp_cmd)) return cmd_interpolate(interp, command);
  return 1;
}
