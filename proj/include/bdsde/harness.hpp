#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/noise.hpp"
#include "bdsde/regression.hpp"
#include "bdsde/stats.hpp"

namespace bdsde {

// Resolved settings of one experiment run. Every field can come from a
// `key = value` config file, from a CLI flag (flags win), or from the
// defaults here; the run echoes the merged result to resolved.config.
struct ExperimentConfig {
  std::string preset = "quad";
  std::vector<std::size_t> levels = {8, 16, 32, 64};
  std::size_t paths = 10000;
  std::uint64_t seed = 12345;
  ProviderKind provider = ProviderKind::quadrature;
  std::size_t basis_degree = 3;
  BMode mode = BMode::frozen;
  bool truncate = true;
  std::string out_dir = "out";

  // Extended knobs (config-file keys only).
  std::string basis = "polynomial";  // or "piecewise"
  std::size_t bins = 8;
  double ridge = 0.0;
  std::size_t grid_nodes = 257;
  std::size_t gh_order = 21;
  std::size_t inner_paths = 256;
  std::size_t refine_factor = 4;
  double slope_lo = 0.8;
  double slope_hi = 1.2;
};

// Throws invalid-argument when levels are empty / not strictly increasing,
// paths == 0, or an enum-like string field holds an unknown value.
void validate_config(const ExperimentConfig& config);

// Applies one `key = value` pair; unknown keys or unparsable values throw
// invalid-input. Keys use the CLI flag spelling without the dashes
// (e.g. "preset", "levels", "basis-degree", "mode", "truncate", "out").
void apply_key_value(ExperimentConfig& config, const std::string& key,
                     const std::string& value);

// Flat key = value file with '#' comments and blank lines.
void load_config_file(ExperimentConfig& config, const std::string& path);

// Creates the output directory and writes the resolved.config echo.
void prepare_out_dir(const ExperimentConfig& config);

// "8,16,32,64" -> {8,16,32,64}; throws invalid-input on junk.
std::vector<std::size_t> parse_levels(const std::string& text);

struct ConvergenceRow {
  std::size_t n = 0;
  double mesh = 0.0;
  double y_err = 0.0;  // sup_i mean_p |Y - Y_ref|^2 at the level's nodes
  double y_err_se = 0.0;
  double z_err = 0.0;  // mean_p sum int |Zhat - Z_ref|^2 ds
  double z_err_se = 0.0;
  double total() const { return y_err + z_err; }
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::size_t reference_n = 0;
  double reference_mesh = 0.0;
  bool exact = false;  // every level at the exactness floor; no fit
  LineFit y_slope;
  LineFit z_slope;
  LineFit total_slope;

  void export_csv(const std::string& path) const;
};

ConvergenceReport converge_study(const ExperimentConfig& config);

// Subcommand drivers: write CSVs under config.out_dir and return the
// process exit code (0 success / within band, 3 out-of-band slope).
// Configuration and numeric errors escape as bdsde::Error; exit_code_for
// maps them to 2 or 3 per the exit-code contract.
int run_converge(const ExperimentConfig& config);
int run_simulate(const ExperimentConfig& config);
int run_diagnose(const ExperimentConfig& config);
int run_regress_study(const ExperimentConfig& config);

int exit_code_for(ErrorCode code);

}  // namespace bdsde
