#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "bdsde/backward.hpp"
#include "bdsde/cond_exp.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/noise.hpp"
#include "bdsde/partition.hpp"
#include "bdsde/presets.hpp"
#include "bdsde/regression.hpp"
#include "bdsde/value_table.hpp"

using namespace bdsde;

namespace {

bool throws_code(ErrorCode want, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == want;
  }
  return false;
}

std::vector<double> ramp(std::size_t m, double lo, double hi) {
  std::vector<double> v(m);
  for (std::size_t k = 0; k < m; ++k)
    v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(m - 1);
  return v;
}

}  // namespace

TEST_CASE("least squares reproduces functions inside the basis span") {
  const auto x = ramp(40, -2.0, 2.0);
  RegressionSpec spec;
  spec.degree = 3;

  // Constants and affine targets are inside every polynomial family.
  std::vector<double> t(40, 4.25);
  auto fit = lsmc_fit(t, x, 1, spec);
  for (double v : fit) CHECK(v == doctest::Approx(4.25).epsilon(1e-12));

  for (std::size_t k = 0; k < 40; ++k) t[k] = 3.0 * x[k] + 1.0;
  fit = lsmc_fit(t, x, 1, spec);
  for (std::size_t k = 0; k < 40; ++k)
    CHECK(fit[k] == doctest::Approx(t[k]).epsilon(1e-11));

  // Cubic content is still exact at degree 3...
  for (std::size_t k = 0; k < 40; ++k) t[k] = x[k] * x[k] * x[k] - x[k];
  fit = lsmc_fit(t, x, 1, spec);
  for (std::size_t k = 0; k < 40; ++k)
    CHECK(fit[k] == doctest::Approx(t[k]).epsilon(1e-10));

  // ...and the projection is a strict smoother for out-of-span targets.
  for (std::size_t k = 0; k < 40; ++k) t[k] = std::sin(3.0 * x[k]);
  fit = lsmc_fit(t, x, 1, spec);
  double resid = 0.0;
  for (std::size_t k = 0; k < 40; ++k) resid += (fit[k] - t[k]) * (fit[k] - t[k]);
  CHECK(resid > 1e-3);
}

TEST_CASE("least squares is linear in the targets") {
  const auto x = ramp(60, -1.5, 2.5);
  RegressionSpec spec;
  spec.degree = 2;
  std::vector<double> t1(60), t2(60), tsum(60);
  for (std::size_t k = 0; k < 60; ++k) {
    t1[k] = std::exp(0.3 * x[k]);
    t2[k] = std::cos(2.0 * x[k]);
    tsum[k] = t1[k] + t2[k];
  }
  const auto f1 = lsmc_fit(t1, x, 1, spec);
  const auto f2 = lsmc_fit(t2, x, 1, spec);
  const auto fs = lsmc_fit(tsum, x, 1, spec);
  for (std::size_t k = 0; k < 60; ++k)
    CHECK(fs[k] == doctest::Approx(f1[k] + f2[k]).epsilon(1e-9));
}

TEST_CASE("degenerate designs resolve to the minimal-norm projection") {
  // Every sample at the same abscissa: the fitted value is the target mean.
  std::vector<double> x(25, 0.7), t(25);
  for (std::size_t k = 0; k < 25; ++k) t[k] = static_cast<double>(k);
  RegressionSpec spec;
  spec.degree = 3;
  const auto fit = lsmc_fit(t, x, 1, spec);
  for (double v : fit) CHECK(v == doctest::Approx(12.0).epsilon(1e-9));
}

TEST_CASE("predictions are invariant under affine reparametrization") {
  const auto x = ramp(50, -1.0, 1.0);
  std::vector<double> xr(50), t(50);
  for (std::size_t k = 0; k < 50; ++k) {
    xr[k] = 100.0 + 25.0 * x[k];
    t[k] = std::tanh(x[k]);
  }
  RegressionSpec spec;
  spec.degree = 3;
  const auto fa = lsmc_fit(t, x, 1, spec);
  const auto fb = lsmc_fit(t, xr, 1, spec);
  for (std::size_t k = 0; k < 50; ++k)
    CHECK(fa[k] == doctest::Approx(fb[k]).epsilon(1e-9));
}

TEST_CASE("two-dimensional regressors fit planes exactly") {
  std::vector<double> xb(80 * 2), t(80);
  for (std::size_t k = 0; k < 80; ++k) {
    const double x = std::sin(0.41 * static_cast<double>(k) + 0.3);
    const double b = std::cos(1.13 * static_cast<double>(k));
    xb[2 * k] = x;
    xb[2 * k + 1] = b;
    t[k] = 2.0 + x - 3.0 * b;
  }
  RegressionSpec spec;
  spec.degree = 2;
  spec.regressors = RegressionSpec::Regressors::x_and_b;
  const auto fit = lsmc_fit(t, xb, 2, spec);
  for (std::size_t k = 0; k < 80; ++k)
    CHECK(fit[k] == doctest::Approx(t[k]).epsilon(1e-10));
}

TEST_CASE("piecewise bins average within each cell") {
  RegressionSpec spec;
  spec.basis = RegressionSpec::Basis::piecewise_bins;
  spec.bins = 2;
  // Two clusters: left targets all 1, right targets all 5.
  std::vector<double> x, t;
  for (int k = 0; k < 10; ++k) {
    x.push_back(-1.0 + 0.01 * k);
    t.push_back(1.0);
  }
  for (int k = 0; k < 10; ++k) {
    x.push_back(1.0 + 0.01 * k);
    t.push_back(5.0);
  }
  const auto fit = lsmc_fit(t, x, 1, spec);
  for (std::size_t k = 0; k < 10; ++k) CHECK(fit[k] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 10; k < 20; ++k) CHECK(fit[k] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("ridge shrinks and input validation rejects bad shapes") {
  const auto x = ramp(30, -1.0, 1.0);
  std::vector<double> t(30);
  for (std::size_t k = 0; k < 30; ++k) t[k] = 3.0 * x[k];
  RegressionSpec spec;
  spec.degree = 1;
  spec.ridge = 10.0;
  const auto shrunk = lsmc_fit(t, x, 1, spec);
  // Heavy ridge pulls the fitted values toward zero.
  for (std::size_t k = 0; k < 30; ++k)
    CHECK(std::abs(shrunk[k]) < std::abs(t[k]) + 1e-12);
  CHECK(std::abs(shrunk[0]) < 0.9 * std::abs(t[0]));

  std::vector<double> bad = t;
  bad[7] = std::numeric_limits<double>::quiet_NaN();
  CHECK(throws_code(ErrorCode::invalid_input, [&] { (void)lsmc_fit(bad, x, 1, spec); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    (void)lsmc_fit(std::span<const double>(t.data(), 29), x, 1, spec);
  }));
}

// Hand-derived one-step values for C = 1, uniform mesh 0.1, |dB_n| = 0.2.
TEST_CASE("truncation ledger recursion matches hand values") {
  const auto part = make_uniform_partition(1.0, 10);
  std::vector<double> db(10, 0.0);
  db[9] = 0.2;  // only the terminal step's increment matters for n-1
  const auto ledger = truncation_ledger(part, db, 1, 1.0);
  REQUIRE(ledger.c.size() == 11);
  REQUIRE(ledger.q.size() == 11);
  CHECK(ledger.c[10] == 2.0);  // 2C exactly
  CHECK(ledger.q[10] == 1.0);  // C exactly
  CHECK(ledger.q[9] == doctest::Approx(2.0743108330476336).epsilon(1e-14));
  CHECK(ledger.c[9] == doctest::Approx(4.125314802802597).epsilon(1e-14));
  // Coefficients grow monotonically toward t = 0.
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(ledger.c[i] >= ledger.c[i + 1]);
    CHECK(ledger.q[i] >= ledger.q[i + 1]);
  }
  // The fitted-expectation bands widen with |x|^2 and stay positive.
  CHECK(ledger.r_bound(9, 0.0) > 0.0);
  CHECK(ledger.r_bound(9, 4.0) > ledger.r_bound(9, 1.0));
  CHECK(ledger.j_bound(9, 0.0) >= 0.0);
  CHECK(ledger.j_bound(9, 4.0) > ledger.j_bound(9, 1.0));

  CHECK(throws_code(ErrorCode::mesh_too_coarse, [&] {
    (void)truncation_ledger(part, db, 1, 10.0);  // C * mesh = 1
  }));
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)truncation_ledger(part, db, 1, 0.0); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    std::vector<double> short_db(9, 0.0);
    (void)truncation_ledger(part, short_db, 1, 1.0);
  }));
}

TEST_CASE("truncation bound coefficients grow under refinement") {
  // The a priori band is not uniformly bounded in the mesh: for a fixed
  // Brownian realization the root coefficients blow up as the partition is
  // refined. Document the growth instead of asserting a false bound.
  auto noise = sample_noise(make_uniform_partition(1.0, 8), 1, 1, 1, BMode::frozen, 97);
  double prev_c0 = 0.0;
  for (int level = 0; level < 4; ++level) {
    const std::size_t n = noise.partition.steps();
    std::vector<double> db(n);
    for (std::size_t i = 1; i <= n; ++i) db[i - 1] = noise.db_row(0, i)[0];
    const auto ledger = truncation_ledger(noise.partition, db, 1, 1.0);
    if (prev_c0 > 0.0) CHECK(ledger.c[0] > prev_c0);
    prev_c0 = ledger.c[0];
    if (level < 3)
      noise = brownian_bridge_refine(noise, make_uniform_partition(1.0, 2 * n),
                                     1000 + static_cast<std::uint64_t>(level));
  }
  WARN_MESSAGE(prev_c0 < 50.0,
               "root bound coefficient keeps growing under refinement; the "
               "band is realization-dependent, not uniform in the mesh");
}

TEST_CASE("truncation clamps into the band and is idempotent") {
  const auto part = make_uniform_partition(1.0, 4);
  const std::vector<double> db(4, 0.1);
  const auto ledger = truncation_ledger(part, db, 1, 1.0);
  const std::vector<double> x = {1.5};
  const double band = ledger.p_bound(2, 1.5 * 1.5);

  CHECK(truncate(0.3, TruncationKind::P, 2, x, ledger) == 0.3);
  CHECK(truncate(band + 5.0, TruncationKind::P, 2, x, ledger) == band);
  CHECK(truncate(-band - 5.0, TruncationKind::P, 2, x, ledger) == -band);
  const double once = truncate(1e9, TruncationKind::R, 2, x, ledger);
  CHECK(truncate(once, TruncationKind::R, 2, x, ledger) == once);
  const double j_once = truncate(-1e9, TruncationKind::J, 2, x, ledger);
  CHECK(j_once == -ledger.j_bound(2, 1.5 * 1.5));

  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)truncate(0.0, TruncationKind::P, 9, x, ledger); }));
}

TEST_CASE("truncated sweep with an exact provider matches the plain sweep") {
  // With generous bounds the clamps never fire, so routing the same provider
  // through the truncated sweep must reproduce the plain backward sweep
  // bit for bit.
  const auto preset = make_preset("linear-gy");
  const auto part = make_uniform_partition(1.0, 4);
  const auto noise = sample_noise(part, 32, 1, 1, BMode::frozen, 41);
  const auto fwd = simulate_forward(preset.spec, noise);
  QuadratureProvider quad(preset.spec, noise,
                          make_uniform_grid(preset.grid_lo, preset.grid_hi, 257));

  std::vector<double> db(4);
  for (std::size_t i = 1; i <= 4; ++i) db[i - 1] = noise.db_row(0, i)[0];
  const auto ledger = truncation_ledger(part, db, 1, 1.0);

  const auto plain = backward_sweep(preset.spec, fwd, noise, quad);
  RegressionSpec reg;  // ignored when the override provider is set
  const auto truncated = regression_sweep(preset.spec, fwd, noise, reg, ledger, {}, &quad);
  CHECK(truncated.y == plain.y);
  CHECK(truncated.z == plain.z);
}

TEST_CASE("regression provider drives the sweep close to the oracle") {
  const auto preset = make_preset("quad");
  const auto part = make_uniform_partition(1.0, 4);
  const std::size_t M = 20000;
  const auto noise = sample_noise(part, M, 1, 1, BMode::frozen, 43);
  const auto fwd = simulate_forward(preset.spec, noise);

  std::vector<double> db(4);
  for (std::size_t i = 1; i <= 4; ++i) db[i - 1] = noise.db_row(0, i)[0];
  const auto ledger = truncation_ledger(part, db, 1, 1.0);

  RegressionSpec reg;
  reg.degree = 3;
  const auto fitted = regression_sweep(preset.spec, fwd, noise, reg, ledger);

  // The value function is quadratic, inside the basis span: the fitted
  // sweep lands on the closed form up to Monte Carlo noise.
  double worst = 0.0;
  for (std::size_t p = 0; p < 200; ++p) {
    const double want = preset.y_exact(part, noise, 0, fwd.state(p, 0, 0));
    worst = std::max(worst, std::abs(fitted.y_at(p, 0) - want));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("error probe reports zero gap against itself and decaying gaps for fits") {
  const auto preset = make_preset("quad");
  const auto part = make_uniform_partition(1.0, 4);

  const std::size_t M_big = 16384;
  const auto noise_big = sample_noise(part, M_big, 1, 1, BMode::frozen, 47);
  const auto fwd_big = simulate_forward(preset.spec, noise_big);
  QuadratureProvider oracle(preset.spec, noise_big,
                            make_uniform_grid(preset.grid_lo, preset.grid_hi, 257));

  // Oracle probed against itself: every gap is identically zero.
  const auto self = regression_error_probe(preset.spec, fwd_big, noise_big, oracle,
                                           oracle, 2.0, 1.0);
  REQUIRE(self.rows.size() == 4);
  for (const auto& row : self.rows) {
    CHECK(row.gap_y == 0.0);
    CHECK(row.gap_zw == 0.0);
  }
  CHECK(self.aggregate == 0.0);

  // Sampling the same seed with fewer paths yields a bit-identical prefix,
  // so the two probes face the same realized equation.
  const std::size_t M_small = 1024;
  const auto noise_small = sample_noise(part, M_small, 1, 1, BMode::frozen, 47);
  for (std::size_t k = 0; k < noise_small.dW.size(); ++k)
    REQUIRE(noise_small.dW[k] == noise_big.dW[k]);
  const auto fwd_small = simulate_forward(preset.spec, noise_small);
  QuadratureProvider oracle_small(preset.spec, noise_small,
                                  make_uniform_grid(preset.grid_lo, preset.grid_hi, 257));

  RegressionProvider approx{RegressionSpec{}};
  const auto probe_big =
      regression_error_probe(preset.spec, fwd_big, noise_big, oracle, approx, 2.0, 1.0);
  const auto probe_small = regression_error_probe(preset.spec, fwd_small, noise_small,
                                                  oracle_small, approx, 2.0, 1.0);
  CHECK(probe_big.aggregate > 0.0);
  CHECK(probe_big.aggregate < probe_small.aggregate);
  CHECK(probe_big.paths == M_big);
  CHECK(probe_big.p == 2.0);
}

TEST_CASE("a constant estimator shift moves the root value linearly") {
  const auto preset = make_preset("linear-gy");
  const auto part = make_uniform_partition(1.0, 4);
  const auto noise = sample_noise(part, 16, 1, 1, BMode::frozen, 53);
  const auto fwd = simulate_forward(preset.spec, noise);
  QuadratureProvider oracle(preset.spec, noise,
                            make_uniform_grid(preset.grid_lo, preset.grid_hi, 257));
  const auto base = backward_sweep(preset.spec, fwd, noise, oracle);

  for (double eps : {1e-4, 1e-3, 1e-2}) {
    ShiftedProvider shifted(oracle, eps);
    const auto bumped = backward_sweep(preset.spec, fwd, noise, shifted);
    const double moved = std::abs(bumped.y_at(0, 0) - base.y_at(0, 0));
    // One shifted estimate per step compounds at most geometrically.
    CHECK(moved > 0.25 * eps);
    CHECK(moved < 40.0 * eps);
  }
}

TEST_CASE("provider factory wires every backend and rejects bad dimensions") {
  const auto preset = make_preset("martingale");
  const auto part = make_uniform_partition(1.0, 2);
  const auto noise = sample_noise(part, 8, 1, 1, BMode::frozen, 59);

  ProviderConfig cfg;
  cfg.grid = make_uniform_grid(preset.grid_lo, preset.grid_hi, 65);
  cfg.inner_paths = 128;

  CHECK(make_provider(ProviderKind::quadrature, preset.spec, noise, cfg)->name() ==
        "quadrature");
  CHECK(make_provider(ProviderKind::nested_mc, preset.spec, noise, cfg)->name() ==
        "nested-mc");
  CHECK(make_provider(ProviderKind::regression, preset.spec, noise, cfg)->name() ==
        "regression");

  auto spec2 = preset.spec;
  spec2.d = 2;
  spec2.x0 = {0.0, 0.0};
  const auto noise2 = sample_noise(part, 8, 2, 1, BMode::frozen, 59);
  CHECK(throws_code(ErrorCode::unsupported_dimension, [&] {
    (void)make_provider(ProviderKind::quadrature, spec2, noise2, cfg);
  }));
}
