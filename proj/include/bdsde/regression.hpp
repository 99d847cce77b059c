#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bdsde/backward.hpp"
#include "bdsde/cond_exp.hpp"

namespace bdsde {

struct RegressionSpec {
  enum class Basis { polynomial, piecewise_bins };
  enum class Regressors { x_only, x_and_b };

  Basis basis = Basis::polynomial;
  std::size_t degree = 3;  // total degree of the monomial family
  std::size_t bins = 8;    // piecewise-constant bin count
  Regressors regressors = Regressors::x_only;
  double ridge = 0.0;
};

// Least-squares projection of the targets onto the basis span, evaluated
// back at the regressor points. regressors is M x dim row-major.
// Rank-deficient designs resolve to the minimal-norm solution; ridge > 0
// shrinks toward zero in the standardized basis.
std::vector<double> lsmc_fit(std::span<const double> targets,
                             std::span<const double> regressors, std::size_t dim,
                             const RegressionSpec& spec);

// A priori bound coefficients per step for one realization of the backward
// noise: |Y_{t_i}| <= c_i + q_i |x|^2, with the derived R/J bands for the
// two fitted conditional expectations.
struct TruncationLedger {
  double C = 0.0;
  double mesh = 0.0;
  Partition partition;
  std::vector<double> c;        // index 0..n
  std::vector<double> q;        // index 0..n
  std::vector<double> db_norm;  // |dB_i| at [i-1]

  double p_bound(std::size_t i, double x_sq) const { return c[i] + q[i] * x_sq; }
  double r_bound(std::size_t i, double x_sq) const;
  double j_bound(std::size_t i, double x_sq) const;
  void export_csv(const std::string& path) const;  // step, t, c_i, q_i
};

// db is the realized backward path, n x l row-major. Requires C > 0 and
// C * mesh < 1.
TruncationLedger truncation_ledger(const Partition& partition, std::span<const double> db,
                                   std::size_t l, double C);

enum class TruncationKind { P, R, J };

// Clamp of value to the band [-bound_i(x), +bound_i(x)].
double truncate(double value, TruncationKind kind, std::size_t i, std::span<const double> x,
                const TruncationLedger& ledger);

// Provider backed by per-request least-squares fits. In frozen-B requests
// (split fields present) the Y and g contributions are fitted separately
// and recombined with the known increment; otherwise the targets are fitted
// directly, on (X, B) when the spec selects joint regressors.
class RegressionProvider : public CondExpProvider {
 public:
  explicit RegressionProvider(RegressionSpec spec) : spec_(spec) {}

  void estimate(const CondExpRequest& req, std::span<double> out) const override;
  std::string name() const override { return "regression"; }

 private:
  RegressionSpec spec_;
};

// Truncated backward induction: fitted Z-expectations clamp to the J band,
// fitted Y-expectations to the R band, and committed Y values to the P
// band. With override_provider set, that provider replaces the internal
// regression backend (the clamps still apply).
BackwardGrid regression_sweep(const ProblemSpec& spec, const ForwardEnsemble& forward,
                              const NoiseGrid& noise, const RegressionSpec& reg_spec,
                              const TruncationLedger& ledger, const SweepOptions& opts = {},
                              const CondExpProvider* override_provider = nullptr);

struct ErrorProbeRow {
  std::size_t step = 0;
  double gap_y = 0.0;   // ||(approx - oracle) E[ytilde]||_p
  double gap_zw = 0.0;  // ||(approx - oracle) E[ytilde dW]||_p
};

struct ErrorProbeReport {
  std::vector<ErrorProbeRow> rows;
  double p = 2.0;
  std::size_t paths = 0;
  double aggregate = 0.0;  // (C / mesh) * max gap over steps and kinds

  void export_csv(const std::string& path) const;  // step, gap_y_lp, gap_zw_lp, p, M
};

// Drives the sweep with the oracle provider while evaluating the second
// provider on identical requests; reports empirical L^p gap norms per step.
ErrorProbeReport regression_error_probe(const ProblemSpec& spec, const ForwardEnsemble& forward,
                                        const NoiseGrid& noise, const CondExpProvider& oracle,
                                        const CondExpProvider& approx, double p, double C,
                                        const SweepOptions& opts = {});

enum class ProviderKind { quadrature, nested_mc, regression };

struct ProviderConfig {
  // quadrature
  std::vector<double> grid;
  QuadratureOptions quadrature;
  // nested
  std::size_t inner_paths = 256;
  NestedMcOptions nested;
  // regression
  RegressionSpec regression;
};

std::unique_ptr<CondExpProvider> make_provider(ProviderKind kind, const ProblemSpec& spec,
                                               const NoiseGrid& noise,
                                               const ProviderConfig& config);

}  // namespace bdsde
