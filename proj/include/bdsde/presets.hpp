#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bdsde/noise.hpp"
#include "bdsde/partition.hpp"
#include "bdsde/problem.hpp"

namespace bdsde {

enum class ReferenceKind { closed_form, quadrature_refined };

// A named benchmark problem together with its declared bound constant, a
// value-table span hint, and (when available) the closed-form solution of
// the discrete scheme under frozen backward noise.
struct Preset {
  std::string name;
  ProblemSpec spec;
  double ledger_C = 1.0;
  double grid_lo = -6.0;
  double grid_hi = 6.0;
  ReferenceKind reference = ReferenceKind::closed_form;

  // y_exact(partition, noise, i, x): scheme value Y_{t_i} at state x;
  // z_exact likewise for Z_{t_i} at interior nodes, continued at i = n by
  // the terminal diffusion gradient (the scheme itself seeds Z_{t_n} = 0).
  // Null when no closed form.
  using ExactFn =
      std::function<double(const Partition&, const NoiseGrid&, std::size_t, double)>;
  ExactFn y_exact;
  ExactFn z_exact;

  bool has_closed_form() const { return static_cast<bool>(y_exact); }
};

// Known ids: constant, martingale, quad, linear-g0, linear-gy, geometric,
// xsq. Throws invalid-argument for anything else.
Preset make_preset(const std::string& name);

const std::vector<std::string>& preset_names();

}  // namespace bdsde
