#include "bdsde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "bdsde/backward.hpp"
#include "bdsde/csv.hpp"
#include "bdsde/diagnostics.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/presets.hpp"
#include "bdsde/rng.hpp"
#include "bdsde/value_table.hpp"

namespace bdsde {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t to_size(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long parsed = std::stoll(v, &pos);
    if (pos != v.size() || parsed < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(parsed);
  } catch (const std::exception&) {
    throw_error(ErrorCode::invalid_input, "bad integer for '" + key + "': " + v);
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long parsed = std::stoull(v, &pos);
    if (pos != v.size() || v[0] == '-') throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw_error(ErrorCode::invalid_input, "bad integer for '" + key + "': " + v);
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw_error(ErrorCode::invalid_input, "bad number for '" + key + "': " + v);
  }
}

std::string provider_name(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::quadrature: return "quadrature";
    case ProviderKind::nested_mc: return "nested";
    case ProviderKind::regression: return "regression";
  }
  return "?";
}

RegressionSpec regression_spec_of(const ExperimentConfig& config) {
  RegressionSpec spec;
  spec.basis = config.basis == "piecewise" ? RegressionSpec::Basis::piecewise_bins
                                           : RegressionSpec::Basis::polynomial;
  spec.degree = config.basis_degree;
  spec.bins = config.bins;
  spec.ridge = config.ridge;
  spec.regressors = config.mode == BMode::per_path ? RegressionSpec::Regressors::x_and_b
                                                   : RegressionSpec::Regressors::x_only;
  return spec;
}

ProviderConfig provider_config_of(const ExperimentConfig& config, const Preset& preset) {
  ProviderConfig pc;
  pc.grid = make_uniform_grid(preset.grid_lo, preset.grid_hi, config.grid_nodes);
  pc.quadrature.gh_order = config.gh_order;
  pc.inner_paths = config.inner_paths;
  pc.regression = regression_spec_of(config);
  return pc;
}

// First `keep` paths of a noise grid, sharing the frozen backward path (and
// therefore describing the same realized equation).
NoiseGrid slice_paths(const NoiseGrid& noise, std::size_t keep) {
  if (keep == 0 || keep > noise.paths)
    throw_error(ErrorCode::invalid_argument, "bad path slice");
  NoiseGrid out;
  out.partition = noise.partition;
  out.d = noise.d;
  out.l = noise.l;
  out.paths = keep;
  out.mode = noise.mode;
  out.seed = noise.seed;
  const std::size_t n = noise.partition.steps();
  out.dW.assign(noise.dW.begin(),
                noise.dW.begin() + static_cast<std::ptrdiff_t>(keep * n * noise.d));
  if (noise.mode == BMode::frozen) {
    out.dB = noise.dB;
  } else {
    out.dB.assign(noise.dB.begin(),
                  noise.dB.begin() + static_cast<std::ptrdiff_t>(keep * n * noise.l));
  }
  return out;
}

BackwardGrid run_sweep(const ExperimentConfig& config, const Preset& preset,
                       const ForwardEnsemble& forward, const NoiseGrid& noise,
                       const CondExpProvider& provider, const ValueTable** table_out) {
  SweepOptions opts;
  if (config.provider == ProviderKind::regression && config.truncate) {
    if (noise.mode != BMode::frozen)
      throw_error(ErrorCode::invalid_argument,
                  "truncation bounds need the frozen-b backward path");
    std::vector<double> db(noise.partition.steps() * noise.l);
    for (std::size_t i = 1; i <= noise.partition.steps(); ++i) {
      auto row = noise.db_row(0, i);
      std::copy(row.begin(), row.end(), db.begin() + (i - 1) * noise.l);
    }
    const TruncationLedger ledger =
        truncation_ledger(noise.partition, db, noise.l, preset.ledger_C);
    return regression_sweep(preset.spec, forward, noise, regression_spec_of(config),
                            ledger, opts);
  }
  if (table_out && config.provider == ProviderKind::quadrature)
    *table_out = &static_cast<const QuadratureProvider&>(provider).table();
  return backward_sweep(preset.spec, forward, noise, provider, opts);
}

}  // namespace

std::vector<std::size_t> parse_levels(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw_error(ErrorCode::invalid_input, "empty level in '" + text + "'");
    out.push_back(to_size(item, "levels"));
  }
  if (out.empty()) throw_error(ErrorCode::invalid_input, "no levels in '" + text + "'");
  return out;
}

void validate_config(const ExperimentConfig& config) {
  if (config.levels.empty())
    throw_error(ErrorCode::invalid_argument, "levels must be non-empty");
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    if (config.levels[i] == 0 || (i > 0 && config.levels[i] <= config.levels[i - 1]))
      throw_error(ErrorCode::invalid_argument, "levels must be strictly increasing");
  }
  if (config.paths == 0) throw_error(ErrorCode::invalid_argument, "paths must be >= 1");
  if (config.basis != "polynomial" && config.basis != "piecewise")
    throw_error(ErrorCode::invalid_argument, "basis must be polynomial or piecewise");
  if (config.grid_nodes < 4)
    throw_error(ErrorCode::invalid_argument, "grid-nodes must be >= 4");
  if (config.gh_order < 3)
    throw_error(ErrorCode::invalid_argument, "gh-order must be >= 3");
  if (!(config.slope_lo < config.slope_hi))
    throw_error(ErrorCode::invalid_argument, "slope band is empty");
  make_preset(config.preset);  // throws for unknown ids
}

void apply_key_value(ExperimentConfig& config, const std::string& key,
                     const std::string& value) {
  if (key == "preset") {
    config.preset = value;
  } else if (key == "levels") {
    config.levels = parse_levels(value);
  } else if (key == "paths") {
    config.paths = to_size(value, key);
  } else if (key == "seed") {
    config.seed = to_u64(value, key);
  } else if (key == "provider") {
    if (value == "quadrature") config.provider = ProviderKind::quadrature;
    else if (value == "nested") config.provider = ProviderKind::nested_mc;
    else if (value == "regression") config.provider = ProviderKind::regression;
    else throw_error(ErrorCode::invalid_input, "unknown provider '" + value + "'");
  } else if (key == "basis-degree") {
    config.basis_degree = to_size(value, key);
  } else if (key == "mode") {
    if (value == "frozen-b") config.mode = BMode::frozen;
    else if (value == "per-path-b") config.mode = BMode::per_path;
    else throw_error(ErrorCode::invalid_input, "unknown mode '" + value + "'");
  } else if (key == "truncate") {
    if (value == "on") config.truncate = true;
    else if (value == "off") config.truncate = false;
    else throw_error(ErrorCode::invalid_input, "truncate must be on or off");
  } else if (key == "out") {
    config.out_dir = value;
  } else if (key == "basis") {
    config.basis = value;
  } else if (key == "bins") {
    config.bins = to_size(value, key);
  } else if (key == "ridge") {
    config.ridge = to_double(value, key);
  } else if (key == "grid-nodes") {
    config.grid_nodes = to_size(value, key);
  } else if (key == "gh-order") {
    config.gh_order = to_size(value, key);
  } else if (key == "inner-paths") {
    config.inner_paths = to_size(value, key);
  } else if (key == "refine-factor") {
    config.refine_factor = to_size(value, key);
  } else if (key == "slope-lo") {
    config.slope_lo = to_double(value, key);
  } else if (key == "slope-hi") {
    config.slope_hi = to_double(value, key);
  } else {
    throw_error(ErrorCode::invalid_input, "unknown config key '" + key + "'");
  }
}

void load_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::io_error, "cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "missing '=' at line %zu of ", lineno);
      throw_error(ErrorCode::invalid_input, buf + path);
    }
    apply_key_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void prepare_out_dir(const ExperimentConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec)
    throw_error(ErrorCode::io_error, "cannot create output dir " + config.out_dir);
  std::ofstream out(config.out_dir + "/resolved.config");
  if (!out)
    throw_error(ErrorCode::io_error, "cannot write to output dir " + config.out_dir);
  out << "preset = " << config.preset << "\n";
  out << "levels = ";
  for (std::size_t i = 0; i < config.levels.size(); ++i)
    out << (i ? "," : "") << config.levels[i];
  out << "\n";
  out << "paths = " << config.paths << "\n";
  out << "seed = " << config.seed << "\n";
  out << "provider = " << provider_name(config.provider) << "\n";
  out << "basis-degree = " << config.basis_degree << "\n";
  out << "mode = " << (config.mode == BMode::frozen ? "frozen-b" : "per-path-b") << "\n";
  out << "truncate = " << (config.truncate ? "on" : "off") << "\n";
  out << "out = " << config.out_dir << "\n";
  out << "basis = " << config.basis << "\n";
  out << "bins = " << config.bins << "\n";
  out << "ridge = " << format_double(config.ridge) << "\n";
  out << "grid-nodes = " << config.grid_nodes << "\n";
  out << "gh-order = " << config.gh_order << "\n";
  out << "inner-paths = " << config.inner_paths << "\n";
  out << "refine-factor = " << config.refine_factor << "\n";
  out << "slope-lo = " << format_double(config.slope_lo) << "\n";
  out << "slope-hi = " << format_double(config.slope_hi) << "\n";
}

ConvergenceReport converge_study(const ExperimentConfig& config) {
  validate_config(config);
  const Preset preset = make_preset(config.preset);
  if (preset.spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "convergence study requires d = 1");
  if (config.mode != BMode::frozen)
    throw_error(ErrorCode::invalid_argument,
                "convergence study requires frozen-b (quadrature reference)");
  if (config.provider == ProviderKind::nested_mc)
    throw_error(ErrorCode::invalid_argument,
                "nested provider cannot rebuild bridge-refined backward paths; "
                "use quadrature or regression for convergence studies");

  const std::size_t n_levels = config.levels.size();
  const double T = preset.spec.T;
  const std::size_t l = preset.spec.l;

  // One Brownian family for all levels: sample the coarsest grid, refine by
  // conditional bridging down to each level, then 4x past the finest for
  // the reference.
  std::vector<Partition> parts;
  for (std::size_t n : config.levels) parts.push_back(make_uniform_partition(T, n));
  const Partition ref_part = make_uniform_partition(T, config.levels.back() * 4);

  std::vector<NoiseGrid> noises;
  noises.push_back(sample_noise(parts[0], config.paths, 1, l, BMode::frozen, config.seed));
  for (std::size_t lv = 1; lv < n_levels; ++lv)
    noises.push_back(
        brownian_bridge_refine(noises[lv - 1], parts[lv], derive_seed(config.seed, lv)));
  const NoiseGrid ref_noise = brownian_bridge_refine(
      noises.back(), ref_part, derive_seed(config.seed, n_levels));

  const std::vector<double> grid =
      make_uniform_grid(preset.grid_lo, preset.grid_hi, config.grid_nodes);
  QuadratureOptions qopts;
  qopts.gh_order = config.gh_order;
  const ValueTable ref_table = solve_backward_table(preset.spec, ref_noise, grid, qopts);
  const ForwardEnsemble ref_forward = simulate_forward(preset.spec, ref_noise);

  ConvergenceReport report;
  report.reference_n = ref_part.steps();
  report.reference_mesh = ref_part.mesh();
  report.rows.resize(n_levels);

  for (std::size_t lv = 0; lv < n_levels; ++lv) {
    const NoiseGrid& noise = noises[lv];
    const Partition& part = parts[lv];
    const std::size_t n = part.steps();
    const ForwardEnsemble forward = simulate_forward(preset.spec, noise);
    const ProviderConfig pc = provider_config_of(config, preset);
    const auto provider = make_provider(config.provider, preset.spec, noise, pc);
    const BackwardGrid bg = run_sweep(config, preset, forward, noise, *provider, nullptr);

    // Reference values on the coupled reference paths. The unbounded table
    // accessors extrapolate linearly for the vanishingly rare states beyond
    // the grid margin.
    std::vector<std::size_t> node_in_ref(n + 1);
    for (std::size_t i = 0; i <= n; ++i) node_in_ref[i] = ref_part.index_of(part.time(i));

    std::vector<double> y_sq_node(config.paths * (n + 1));
    std::vector<double> z_int(config.paths);
    run_indexed(config.paths, ExecMode::parallel, [&](std::size_t p) {
      for (std::size_t i = 0; i <= n; ++i) {
        const std::size_t r = node_in_ref[i];
        const double y_ref = ref_table.eval_u_unbounded(r, ref_forward.state(p, r, 0));
        const double dy = bg.y_at(p, i) - y_ref;
        y_sq_node[p * (n + 1) + i] = dy * dy;
      }
      double acc = 0.0;
      for (std::size_t r = 1; r <= ref_part.steps(); ++r) {
        const double s = ref_part.time(r - 1);
        const double z_ref = ref_table.eval_v_unbounded(r - 1, ref_forward.state(p, r - 1, 0));
        const double z_hat = bg.z_at(p, part.step_index(s), 0);
        const double dz = z_hat - z_ref;
        acc += ref_part.dt(r) * dz * dz;
      }
      z_int[p] = acc;
    });

    ConvergenceRow& row = report.rows[lv];
    row.n = n;
    row.mesh = part.mesh();
    std::vector<double> node_col(config.paths);
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t p = 0; p < config.paths; ++p)
        node_col[p] = y_sq_node[p * (n + 1) + i];
      const double m = mean(node_col);
      if (m > row.y_err) {
        row.y_err = m;
        row.y_err_se = standard_error(node_col);
      }
    }
    row.z_err = mean(z_int);
    row.z_err_se = standard_error(z_int);
    if (!std::isfinite(row.total()))
      throw_error(ErrorCode::numeric_overflow, "non-finite convergence error");
    noises[lv] = NoiseGrid{};  // drop this level's increments before the next
  }

  // Closed-form-exact presets sit at the floor; a log-log fit would measure
  // rounding noise, so the report flags them instead.
  const double floor_sq = 1e-12;
  report.exact = std::all_of(report.rows.begin(), report.rows.end(),
                             [&](const ConvergenceRow& r) { return r.total() <= floor_sq; });
  if (!report.exact) {
    std::vector<double> mesh, ye, ze, te;
    for (const auto& r : report.rows) {
      mesh.push_back(r.mesh);
      ye.push_back(r.y_err);
      ze.push_back(r.z_err);
      te.push_back(r.total());
    }
    const auto positive = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
    };
    if (positive(te)) report.total_slope = fit_loglog(mesh, te);
    if (positive(ye)) report.y_slope = fit_loglog(mesh, ye);
    if (positive(ze)) report.z_slope = fit_loglog(mesh, ze);
  }
  return report;
}

void ConvergenceReport::export_csv(const std::string& path) const {
  CsvWriter csv(path);
  csv.header({"level", "n", "mesh", "y_err", "y_err_se", "z_err", "z_err_se", "total_err"});
  for (std::size_t lv = 0; lv < rows.size(); ++lv) {
    const auto& r = rows[lv];
    csv.field(lv);
    csv.field(r.n);
    csv.field(r.mesh);
    csv.field(r.y_err);
    csv.field(r.y_err_se);
    csv.field(r.z_err);
    csv.field(r.z_err_se);
    csv.field(r.total());
    csv.end_row();
  }
  const auto slope_row = [&](const std::string& label, const LineFit& fit) {
    csv.field(label);
    csv.field(std::string(""));
    csv.field(std::string(""));
    csv.field(fit.slope);
    csv.field(1.96 * fit.slope_se);
    csv.field(std::string(""));
    csv.field(std::string(""));
    csv.field(std::string(""));
    csv.end_row();
  };
  csv.field(std::string("reference"));
  csv.field(reference_n);
  csv.field(reference_mesh);
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.end_row();
  csv.field(std::string("status"));
  csv.field(std::string(exact ? "exact" : "fitted"));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.end_row();
  if (!exact) {
    slope_row("slope_total", total_slope);
    slope_row("slope_y", y_slope);
    slope_row("slope_z", z_slope);
  }
}

int run_converge(const ExperimentConfig& config) {
  prepare_out_dir(config);
  const ConvergenceReport report = converge_study(config);
  report.export_csv(config.out_dir + "/converge.csv");
  if (report.exact) return 0;
  const double s = report.total_slope.slope;
  return (s >= config.slope_lo && s <= config.slope_hi) ? 0 : 3;
}

int run_simulate(const ExperimentConfig& config) {
  validate_config(config);
  prepare_out_dir(config);
  const Preset preset = make_preset(config.preset);
  const std::size_t n = config.levels.back();
  const Partition part = make_uniform_partition(preset.spec.T, n);
  const NoiseGrid noise =
      sample_noise(part, config.paths, preset.spec.d, preset.spec.l, config.mode, config.seed);
  const ForwardEnsemble forward = simulate_forward(preset.spec, noise);
  const ProviderConfig pc = provider_config_of(config, preset);
  const auto provider = make_provider(config.provider, preset.spec, noise, pc);
  const ValueTable* table = nullptr;
  const BackwardGrid bg = run_sweep(config, preset, forward, noise, *provider, &table);

  export_forward_csv(forward, config.out_dir + "/forward.csv");
  export_backward_csv(bg, config.out_dir + "/backward.csv");
  if (table) table->export_csv(config.out_dir + "/value_table.csv");
  if (config.provider == ProviderKind::regression && config.truncate) {
    std::vector<double> db(part.steps() * noise.l);
    for (std::size_t i = 1; i <= part.steps(); ++i) {
      auto row = noise.db_row(0, i);
      std::copy(row.begin(), row.end(), db.begin() + (i - 1) * noise.l);
    }
    truncation_ledger(part, db, noise.l, preset.ledger_C)
        .export_csv(config.out_dir + "/ledger.csv");
  }
  return 0;
}

int run_diagnose(const ExperimentConfig& config) {
  validate_config(config);
  prepare_out_dir(config);
  const Preset preset = make_preset(config.preset);
  DiagnosticsOptions opts;
  opts.refine_factor = config.refine_factor;
  opts.grid_nodes = config.grid_nodes;
  opts.gh_order = config.gh_order;
  const RegularityReport report =
      l2_regularity_stat(preset, config.levels, config.paths, config.seed, opts);
  report.export_csv(config.out_dir + "/regularity.csv");

  const bool all_zero =
      std::all_of(report.rows.begin(), report.rows.end(),
                  [](const RegularityRow& r) { return r.z_stat <= 1e-12; });
  if (all_zero) return 0;
  const double s = report.z_slope.slope;
  return (s >= config.slope_lo && s <= config.slope_hi) ? 0 : 3;
}

int run_regress_study(const ExperimentConfig& config) {
  validate_config(config);
  prepare_out_dir(config);
  const Preset preset = make_preset(config.preset);
  if (preset.spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "regression study requires d = 1");
  if (config.mode != BMode::frozen)
    throw_error(ErrorCode::invalid_argument,
                "regression study requires frozen-b (quadrature oracle)");
  const std::size_t n = config.levels.back();
  const Partition part = make_uniform_partition(preset.spec.T, n);

  // One frozen backward path for the whole M-sweep so every row probes the
  // same realized equation with a growing forward ensemble.
  const NoiseGrid noise_full =
      sample_noise(part, config.paths, 1, preset.spec.l, BMode::frozen, config.seed);
  const ProviderConfig pc = provider_config_of(config, preset);
  const auto oracle = make_provider(ProviderKind::quadrature, preset.spec, noise_full, pc);
  const RegressionProvider approx(regression_spec_of(config));

  std::vector<std::size_t> sweep;
  for (std::size_t m = config.paths; m >= 64 && sweep.size() < 4; m /= 4)
    sweep.push_back(m);
  if (sweep.empty()) sweep.push_back(config.paths);
  std::sort(sweep.begin(), sweep.end());

  CsvWriter decay(config.out_dir + "/decay.csv");
  decay.header({"paths", "gap_y_max", "gap_zw_max", "aggregate"});
  ErrorProbeReport last;
  for (std::size_t m : sweep) {
    const NoiseGrid noise = slice_paths(noise_full, m);
    const ForwardEnsemble forward = simulate_forward(preset.spec, noise);
    const ErrorProbeReport probe = regression_error_probe(
        preset.spec, forward, noise, *oracle, approx, 2.0, preset.ledger_C);
    double gy = 0.0, gzw = 0.0;
    for (const auto& row : probe.rows) {
      gy = std::max(gy, row.gap_y);
      gzw = std::max(gzw, row.gap_zw);
    }
    decay.field(m);
    decay.field(gy);
    decay.field(gzw);
    decay.field(probe.aggregate);
    decay.end_row();
    if (m == sweep.back()) last = probe;
  }
  last.export_csv(config.out_dir + "/probe.csv");
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::invalid_input:
    case ErrorCode::io_error:
    case ErrorCode::unsupported_dimension:
      return 2;
    case ErrorCode::numeric_overflow:
    case ErrorCode::mesh_too_coarse:
    case ErrorCode::no_convergence:
    case ErrorCode::out_of_domain:
    case ErrorCode::resource_limit:
      return 3;
  }
  return 2;
}

}  // namespace bdsde
