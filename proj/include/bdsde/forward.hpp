#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdsde/noise.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/partition.hpp"
#include "bdsde/problem.hpp"

namespace bdsde {

// Euler states for M forward paths: row-major paths x (n+1) x d, with
// state index 0..n (state 0 is x0 exactly).
struct ForwardEnsemble {
  Partition partition;
  std::size_t d = 1;
  std::size_t paths = 0;
  std::vector<double> states;

  double state(std::size_t p, std::size_t i, std::size_t k) const {
    return states[(p * (partition.steps() + 1) + i) * d + k];
  }
  std::span<const double> state_row(std::size_t p, std::size_t i) const {
    return {states.data() + (p * (partition.steps() + 1) + i) * d, d};
  }
  std::span<double> state_row(std::size_t p, std::size_t i) {
    return {states.data() + (p * (partition.steps() + 1) + i) * d, d};
  }
};

// One explicit Euler update: x_next = x + b(t, x) dt + sigma(t, x) dw.
// Scratch spans must hold d and d*d doubles respectively.
void euler_step(const CoefficientSet& coeffs, double t, double dt,
                std::span<const double> x, std::span<const double> dw,
                std::span<double> x_next, std::span<double> b_buf,
                std::span<double> sigma_buf);

ForwardEnsemble simulate_forward(const ProblemSpec& spec, const NoiseGrid& noise,
                                 ExecMode exec = ExecMode::parallel);

// Max over paths/steps/components of |recursion residual| when the Euler
// update is re-applied to stored states; exact replays return 0.
double verify_recursion(const ProblemSpec& spec, const ForwardEnsemble& ens,
                        const NoiseGrid& noise);

// The piecewise evaluation process: X at the partition node floor(t).
std::span<const double> step_process_eval(const ForwardEnsemble& ens, std::size_t p,
                                          double t);

struct StrongErrorRow {
  std::size_t steps = 0;
  double mesh = 0.0;
  double rmse = 0.0;        // sqrt E max_i |X^pi_{t_i} - X^ref_{t_i}|^2
  double rmse_se = 0.0;     // delta-method standard error of the RMSE
};

// Coupled strong-error study: nested levels share one Brownian family via
// bridge refinement, and errors are measured against a reference mesh four
// times finer than the finest level, at the coarse nodes of each level.
std::vector<StrongErrorRow> forward_strong_error(const ProblemSpec& spec,
                                                 std::span<const std::size_t> levels,
                                                 std::size_t paths, std::uint64_t seed,
                                                 ExecMode exec = ExecMode::parallel);

void export_forward_csv(const ForwardEnsemble& ens, const std::string& path,
                        std::size_t max_paths = 64);

}  // namespace bdsde
