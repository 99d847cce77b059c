#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdsde/cond_exp.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/noise.hpp"
#include "bdsde/problem.hpp"

namespace bdsde {

struct PicardOptions {
  double tol = 1e-12;
  std::size_t max_iters = 50;
};

// Fixed point of y = e + f(t, x, y, z) dt by Picard iteration from y0 = e.
// Requires lipschitz_K * dt < 1 (contraction); stops when successive
// iterates differ by at most tol.
double picard_solve(const DriverFn& f, double t, std::span<const double> x, double e,
                    std::span<const double> z, double dt, double lipschitz_K,
                    const PicardOptions& opts = {}, std::size_t* iters_out = nullptr);

// ytilde_i = y_i + g(t_i, x_i, y_i) . db_i. g_buf must hold l doubles.
double tilde_y(double y_i, double t_i, std::span<const double> x_i,
               std::span<const double> db_i, const CouplingFn& g, std::span<double> g_buf);

// Per-sample Z_{t_{i-1}} component: provider estimate of E_{i-1}[ytilde dW]
// divided by dt. req.kind must be tilde_y_dw.
std::vector<double> z_update(const CondExpProvider& provider, const CondExpRequest& req,
                             double dt);

// Picard solve of the implicit Y-update given e = E_{i-1}[ytilde].
double y_update(double e, double t, std::span<const double> x, std::span<const double> z,
                double dt, const CoefficientSet& coeffs, const PicardOptions& opts = {},
                std::size_t* iters_out = nullptr);

// Backward solution samples: y is paths x (n+1), z is paths x (n+1) x d with
// z[.][n] = 0; picard_iters[i-1] records the worst-case iteration count of
// step i.
struct BackwardGrid {
  Partition partition;
  std::size_t d = 1;
  std::size_t paths = 0;
  std::vector<double> y;
  std::vector<double> z;
  std::vector<std::size_t> picard_iters;

  double y_at(std::size_t p, std::size_t i) const { return y[p * (partition.steps() + 1) + i]; }
  double z_at(std::size_t p, std::size_t i, std::size_t k) const {
    return z[(p * (partition.steps() + 1) + i) * d + k];
  }
  std::span<const double> z_row(std::size_t p, std::size_t i) const {
    return {z.data() + (p * (partition.steps() + 1) + i) * d, d};
  }
};

struct SweepOptions {
  PicardOptions picard;
  ExecMode exec = ExecMode::parallel;
};

// Backward induction over all paths: terminal assignment, then for
// i = n..1 form ytilde, estimate the two conditional expectations through
// the provider, and apply z_update then y_update.
BackwardGrid backward_sweep(const ProblemSpec& spec, const ForwardEnsemble& forward,
                            const NoiseGrid& noise, const CondExpProvider& provider,
                            const SweepOptions& opts = {});

void export_backward_csv(const BackwardGrid& grid, const std::string& path,
                         std::size_t max_paths = 64);

}  // namespace bdsde
