#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bdsde {

// Coefficient callables. States are length-d spans; the diffusion writes a
// d x d row-major matrix; the noise coupling g writes a length-l vector.
using DriftFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using DiffusionFn =
    std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using DriverFn = std::function<double(double t, std::span<const double> x, double y,
                                      std::span<const double> z)>;
using CouplingFn =
    std::function<void(double t, std::span<const double> x, double y, std::span<double> out)>;

// The four coefficients of the equation plus the declared joint Lipschitz
// constant. Immutable by convention: copies share the callables and all
// entry points are const.
struct CoefficientSet {
  DriftFn b;
  DiffusionFn sigma;
  DriverFn f;
  CouplingFn g;
  double lipschitz_K = 1.0;
};

// Terminal payoff: either a pointwise function of the terminal state or a
// discrete functional of the whole simulated path (states at all partition
// times, row-major (n+1) x d).
class TerminalCondition {
public:
  using PointwiseFn = std::function<double(std::span<const double> x)>;
  using PathFn = std::function<double(std::span<const double> path, std::size_t d)>;

  static TerminalCondition pointwise(PointwiseFn h);
  static TerminalCondition path_functional(PathFn h);

  bool is_pointwise() const { return static_cast<bool>(h_); }

  // Pointwise evaluation; throws invalid-argument for path functionals.
  double operator()(std::span<const double> x) const;

  // Evaluation on a full discrete path; pointwise payoffs use the last state.
  double eval_path(std::span<const double> path, std::size_t d) const;

private:
  PointwiseFn h_;
  PathFn h_path_;
};

struct ProblemSpec {
  CoefficientSet coeffs;
  TerminalCondition terminal;
  std::size_t d = 1;  // forward state / W dimension
  std::size_t l = 1;  // backward-noise dimension
  double T = 1.0;
  std::vector<double> x0;
};

// Probe box for assumption validation.
struct ProbeBox {
  double x_radius = 5.0;  // state probes in x0 +- radius per coordinate
  double y_radius = 5.0;
  double z_radius = 5.0;
  std::size_t path_states = 5;  // synthetic path length for path functionals
};

// Probabilistic check of the structural assumptions: Lipschitz difference
// ratios for every coefficient, growth of the coefficients at the origin,
// and (for path terminals) the finite-difference gradient-sum bound.
struct ValidationReport {
  double max_ratio_b = 0.0;
  double max_ratio_sigma = 0.0;
  double max_ratio_f = 0.0;
  double max_ratio_g = 0.0;
  double max_ratio_terminal = 0.0;
  double max_origin_bound = 0.0;   // sup over probed t of the coefficients at 0
  double gradient_sum_max = 0.0;   // path terminals only
  double tolerance = 1e-8;
  std::size_t probes = 0;

  double worst() const;
  // All probed ratios and bounds within K * (1 + tolerance). Monotone in K.
  bool pass(double K) const;
};

ValidationReport validate_assumptions(const ProblemSpec& spec, std::size_t probes,
                                      std::uint64_t seed, const ProbeBox& box = {});

}  // namespace bdsde
