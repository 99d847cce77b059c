#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "bdsde/noise.hpp"
#include "bdsde/problem.hpp"
#include "bdsde/value_table.hpp"

namespace bdsde {

// One pooled conditional-expectation query from the backward sweep, at
// integrand step i (conditioning at t_{i-1}): estimate E_{i-1}[targets]
// as a function of the conditioning states.
struct CondExpRequest {
  enum class Kind { tilde_y, tilde_y_dw };

  std::size_t step = 1;
  Kind kind = Kind::tilde_y;
  std::size_t component = 0;  // which dW component, for tilde_y_dw
  std::size_t d = 1;
  std::size_t l = 1;

  std::span<const double> targets;      // M integrand samples
  std::span<const double> cond_states;  // M x d states X_{t_{i-1}}
  std::span<const double> b_states;     // M x l values B_{t_{i-1}} (per-path mode)

  // Frozen-B split of the integrand, targets = y_part + g_part . db, so a
  // regression backend can fit the two pieces separately and recombine with
  // the known increment.
  std::span<const double> y_part;  // M
  std::span<const double> g_part;  // M x l
  std::span<const double> db;      // l (frozen increment of this step)

  std::size_t samples() const { return targets.size(); }
};

class CondExpProvider {
 public:
  virtual ~CondExpProvider() = default;
  // Writes one estimate per sample; out.size() == req.samples().
  virtual void estimate(const CondExpRequest& req, std::span<double> out) const = 0;
  virtual std::string name() const = 0;
};

// Exact one-step conditional expectations for a 1-d problem, integrating the
// step-i table row over the Gaussian increment.
struct CondExpPair {
  double e_y = 0.0;  // E[ytilde_i | X_{i-1} = x]
  double z = 0.0;    // E[ytilde_i dW_i | X_{i-1} = x] / dt_i
};

CondExpPair quadrature_cond_exp(const ValueTable& table, const CoefficientSet& coeffs,
                                std::size_t step, double dt, std::span<const double> db,
                                double x, std::size_t quad_order);

struct QuadratureOptions {
  std::size_t gh_order = 21;
  double picard_tol = 1e-12;
  std::size_t picard_max = 50;
  double margin_fraction = 0.1;
};

// Full backward induction on a spatial grid: returns the table of u_i / v_i
// rows for every partition node. Requires d = 1, a pointwise terminal
// function, and frozen backward noise.
ValueTable solve_backward_table(const ProblemSpec& spec, const NoiseGrid& noise,
                                std::vector<double> grid, const QuadratureOptions& opts = {},
                                ExecMode exec = ExecMode::parallel);

class QuadratureProvider : public CondExpProvider {
 public:
  QuadratureProvider(const ProblemSpec& spec, const NoiseGrid& noise, std::vector<double> grid,
                     const QuadratureOptions& opts = {}, ExecMode exec = ExecMode::parallel);

  void estimate(const CondExpRequest& req, std::span<double> out) const override;
  std::string name() const override { return "quadrature"; }
  const ValueTable& table() const { return table_; }

 private:
  ProblemSpec spec_;
  ValueTable table_;
  std::vector<double> db_;  // n x l frozen increments
  QuadratureOptions opts_;
  ExecMode exec_;
};

struct NestedMcOptions {
  std::uint64_t budget = 100000000;  // total inner one-step simulations
  double picard_tol = 1e-12;
  std::size_t picard_max = 50;
};

struct NestedMcResult {
  double e_y = 0.0;
  double z = 0.0;     // E[ytilde dW] / dt
  double se_y = 0.0;  // outer-sample standard error of e_y
  double se_z = 0.0;
  std::uint64_t evals = 0;
};

// Brute-force oracle: resimulates the backward scheme from conditioning
// step i with fresh inner forward noise and the same frozen backward
// increments regenerated from noise_seed. Cost grows as inner_paths^(n-i).
NestedMcResult nested_mc_cond_exp(const ProblemSpec& spec, const Partition& partition,
                                  std::uint64_t noise_seed, std::size_t step, double x,
                                  std::size_t inner_paths, const NestedMcOptions& opts = {});

class NestedMcProvider : public CondExpProvider {
 public:
  NestedMcProvider(const ProblemSpec& spec, const Partition& partition,
                   std::uint64_t noise_seed, std::size_t inner_paths,
                   const NestedMcOptions& opts = {});

  void estimate(const CondExpRequest& req, std::span<double> out) const override;
  std::string name() const override { return "nested-mc"; }

 private:
  ProblemSpec spec_;
  Partition partition_;
  std::uint64_t noise_seed_ = 0;
  std::size_t inner_paths_ = 0;
  NestedMcOptions opts_;
};

// Adds a constant shift to every estimate of a base provider; used to study
// how estimator errors propagate through the backward induction.
class ShiftedProvider : public CondExpProvider {
 public:
  ShiftedProvider(const CondExpProvider& base, double shift) : base_(base), shift_(shift) {}

  void estimate(const CondExpRequest& req, std::span<double> out) const override {
    base_.estimate(req, out);
    for (double& v : out) v += shift_;
  }
  std::string name() const override { return base_.name() + "+shift"; }

 private:
  const CondExpProvider& base_;
  double shift_ = 0.0;
};

}  // namespace bdsde
