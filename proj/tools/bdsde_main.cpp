#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "bdsde/harness.hpp"

namespace {

// Raw flag values; kept as strings so the config-file and CLI paths share
// one parser (apply_key_value) and CLI flags override file values.
struct RawFlags {
  std::string preset, levels, paths, seed, provider, basis_degree, mode, truncate, out;
  std::string config;
};

void add_common_flags(CLI::App* sub, RawFlags& raw) {
  sub->add_option("--preset", raw.preset, "Problem preset id");
  sub->add_option("--levels", raw.levels, "Comma-separated step counts, e.g. 8,16,32,64");
  sub->add_option("--paths", raw.paths, "Monte Carlo path count M");
  sub->add_option("--seed", raw.seed, "Root RNG seed");
  sub->add_option("--provider", raw.provider,
                  "Conditional-expectation backend: quadrature|nested|regression");
  sub->add_option("--basis-degree", raw.basis_degree, "Polynomial basis total degree");
  sub->add_option("--mode", raw.mode, "Backward-noise conditioning: frozen-b|per-path-b");
  sub->add_option("--truncate", raw.truncate, "Truncation safeguards: on|off");
  sub->add_option("--out", raw.out, "Output directory");
  sub->add_option("--config", raw.config, "key = value config file (flags override)");
}

bdsde::ExperimentConfig merge_config(const CLI::App* sub, const RawFlags& raw) {
  bdsde::ExperimentConfig cfg;
  if (sub->count("--config")) bdsde::load_config_file(cfg, raw.config);
  const std::pair<const char*, const std::string*> flags[] = {
      {"--preset", &raw.preset},   {"--levels", &raw.levels},
      {"--paths", &raw.paths},     {"--seed", &raw.seed},
      {"--provider", &raw.provider}, {"--basis-degree", &raw.basis_degree},
      {"--mode", &raw.mode},       {"--truncate", &raw.truncate},
      {"--out", &raw.out},
  };
  for (const auto& [flag, value] : flags) {
    if (sub->count(flag)) bdsde::apply_key_value(cfg, flag + 2, *value);
  }
  bdsde::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BDSDE solver and convergence-experiment harness"};
  app.require_subcommand(1);
  RawFlags raw;

  CLI::App* converge = app.add_subcommand(
      "converge", "Per-level Y/Z errors against a 4x quadrature reference, with slopes");
  CLI::App* simulate = app.add_subcommand(
      "simulate", "One solve at the finest level; forward/backward/value-table CSVs");
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "Z dispersion and Y modulus statistics per level");
  CLI::App* regress = app.add_subcommand(
      "regress-study", "Regression-vs-oracle gap norms per step and path-count sweep");
  for (CLI::App* sub : {converge, simulate, diagnose, regress}) add_common_flags(sub, raw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (converge->parsed()) return bdsde::run_converge(merge_config(converge, raw));
    if (simulate->parsed()) return bdsde::run_simulate(merge_config(simulate, raw));
    if (diagnose->parsed()) return bdsde::run_diagnose(merge_config(diagnose, raw));
    if (regress->parsed()) return bdsde::run_regress_study(merge_config(regress, raw));
  } catch (const bdsde::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", bdsde::error_code_name(e.code()), e.what());
    return bdsde::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
