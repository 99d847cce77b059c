#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdsde/forward.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/partition.hpp"
#include "bdsde/presets.hpp"
#include "bdsde/problem.hpp"
#include "bdsde/stats.hpp"

namespace bdsde {

// Conditions a per-path Z sample taken at a fine node on the information at
// the left node of the enclosing coarse step.
class ZtildeConditioner {
 public:
  virtual ~ZtildeConditioner() = default;
  // coarse_step in 1..n; fine_node is the global fine index of the sample
  // and anchor_node the fine index of the coarse-left node. z_node holds one
  // value per path; out receives the conditional values.
  virtual void condition(std::size_t coarse_step, std::size_t fine_node,
                         std::size_t anchor_node, std::span<const double> z_node,
                         std::span<double> out) const = 0;
};

// For samples that are already measurable at the coarse-left node
// (deterministic Z, or Z evaluated at the left node itself).
class MeasurableConditioner : public ZtildeConditioner {
 public:
  void condition(std::size_t, std::size_t, std::size_t, std::span<const double> z_node,
                 std::span<double> out) const override;
};

// Conditions grid-sampled Z functions through the one-step transition of the
// forward chain: the row of Z values at a fine node is propagated backward,
// one Gauss-Hermite step per fine interval, to the coarse-left time, then
// evaluated at each path's state there. Rows are interpolated with the same
// shape-preserving cubic used by the value tables (linear beyond the grid).
class SemigroupConditioner : public ZtildeConditioner {
 public:
  // z_rows: (fine_n + 1) x grid.size() row-major samples of Z on the grid;
  // states: forward ensemble on the fine partition (conditioning states).
  SemigroupConditioner(const CoefficientSet& coeffs, const Partition& fine,
                       std::vector<double> grid, std::vector<double> z_rows,
                       const ForwardEnsemble& states, std::size_t gh_order = 21,
                       ExecMode exec = ExecMode::parallel);

  void condition(std::size_t coarse_step, std::size_t fine_node,
                 std::size_t anchor_node, std::span<const double> z_node,
                 std::span<double> out) const override;

 private:
  const CoefficientSet& coeffs_;
  Partition fine_;
  std::vector<double> grid_;
  std::vector<double> z_rows_;
  const ForwardEnsemble& states_;
  std::size_t gh_order_;
  ExecMode exec_;
};

// Conditional time-average of Z over each coarse step: trapezoidal average
// of the fine-node samples, each node conditioned on the coarse-left
// information. z_samples is paths x (fine_n + 1) row-major; the result is
// paths x n (coarse steps). The fine partition must refine the coarse one.
std::vector<double> ztilde(std::span<const double> z_samples, std::size_t paths,
                           const Partition& fine, const Partition& coarse,
                           const ZtildeConditioner& conditioner);

// Which F_{t_{i-1}}-measurable candidate the dispersion statistic is taken
// against: the conditional time-average (the minimizer) or the left-endpoint
// Z value (a competitor used to probe projection optimality).
enum class ZtildeKind { conditional_average, left_endpoint };

struct DiagnosticsOptions {
  std::size_t refine_factor = 4;  // fine mesh per coarse step
  std::size_t grid_nodes = 257;
  std::size_t gh_order = 21;
  ZtildeKind candidate = ZtildeKind::conditional_average;
  ExecMode exec = ExecMode::parallel;
};

struct RegularityRow {
  std::size_t n = 0;
  double mesh = 0.0;
  double z_stat = 0.0;
  double z_stat_se = 0.0;
  double y_stat = 0.0;
  double y_stat_se = 0.0;
};

// Per-level dispersion statistics with fitted log-log slopes. fine_mesh is
// the smallest stand-in mesh used for the continuous paths; the statistics
// carry an O(fine_mesh) discretization bias.
struct RegularityReport {
  std::vector<RegularityRow> rows;
  LineFit z_slope;
  LineFit y_slope;
  double fine_mesh = 0.0;

  void export_csv(const std::string& path) const;
};

// Monte Carlo estimate per level n of
//   sum_i E int_{t_{i-1}}^{t_i} |Z_s - Ztilde_{t_{i-1}}|^2 ds
// together with the Y-modulus statistic E[max_i sup_[t_{i-1},t_i] |Y_t -
// Y_{t_{i-1}}|^2], both on a refine_factor-times-finer stand-in grid.
// Reference Y/Z come from the preset's closed form when present, otherwise
// from a fine-grid quadrature table. Requires at least 2 levels.
RegularityReport l2_regularity_stat(const Preset& preset,
                                    std::span<const std::size_t> levels,
                                    std::size_t paths, std::uint64_t seed,
                                    const DiagnosticsOptions& opts = {});

// The Y-modulus column of the same computation, one value per level.
std::vector<double> y_modulus_stat(const Preset& preset,
                                   std::span<const std::size_t> levels,
                                   std::size_t paths, std::uint64_t seed,
                                   const DiagnosticsOptions& opts = {});

}  // namespace bdsde
