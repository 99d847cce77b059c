#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "bdsde/cond_exp.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/gauss_hermite.hpp"
#include "bdsde/presets.hpp"
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

ProblemSpec unit_brownian_spec() {
  // b = 0, sigma = 1, f = 0, g = 0: X is plain Brownian motion.
  ProblemSpec spec;
  spec.coeffs.b = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  spec.coeffs.sigma = [](double, std::span<const double>, std::span<double> out) {
    out[0] = 1.0;
  };
  spec.coeffs.f = [](double, std::span<const double>, double, std::span<const double>) {
    return 0.0;
  };
  spec.coeffs.g = [](double, std::span<const double>, double, std::span<double> out) {
    out[0] = 0.0;
  };
  spec.terminal = TerminalCondition::pointwise([](std::span<const double> x) { return x[0]; });
  spec.x0 = {0.0};
  return spec;
}

}  // namespace

// Nodes and weights frozen from numpy.polynomial.hermite.hermgauss.
TEST_CASE("gauss hermite rules match reference values") {
  const auto& r5 = gauss_hermite(5);
  REQUIRE(r5.nodes.size() == 5);
  CHECK(r5.nodes[0] == doctest::Approx(-2.0201828704560856).epsilon(1e-14));
  CHECK(r5.nodes[1] == doctest::Approx(-0.9585724646138185).epsilon(1e-14));
  CHECK(r5.nodes[2] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r5.nodes[4] == doctest::Approx(2.0201828704560856).epsilon(1e-14));
  CHECK(r5.weights[0] == doctest::Approx(0.01995324205904592).epsilon(1e-12));
  CHECK(r5.weights[1] == doctest::Approx(0.3936193231522411).epsilon(1e-12));
  CHECK(r5.weights[2] == doctest::Approx(0.9453087204829418).epsilon(1e-12));

  const auto& r21 = gauss_hermite(21);
  REQUIRE(r21.nodes.size() == 21);
  CHECK(r21.nodes[20] == doctest::Approx(5.550351873264678).epsilon(1e-13));
  CHECK(r21.nodes[0] == doctest::Approx(-5.550351873264678).epsilon(1e-13));
  CHECK(r21.weights[10] == doctest::Approx(0.47902370312017756).epsilon(1e-12));

  const double sqrt_pi = std::sqrt(std::acos(-1.0));
  for (std::size_t order : {1, 2, 5, 21, 64}) {
    const auto& r = gauss_hermite(order);
    double acc = 0.0;
    for (double w : r.weights) acc += w;
    CHECK(acc == doctest::Approx(sqrt_pi).epsilon(1e-13));
    // Symmetry of nodes.
    for (std::size_t k = 0; k < r.nodes.size(); ++k)
      CHECK(r.nodes[k] == doctest::Approx(-r.nodes[r.nodes.size() - 1 - k]).epsilon(1e-13));
  }
  CHECK(throws_code(ErrorCode::invalid_argument, [] { (void)gauss_hermite(0); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] { (void)gauss_hermite(600); }));
}

TEST_CASE("gaussian expectations integrate moments exactly") {
  const auto& rule = gauss_hermite(8);
  // Z ~ N(m, s^2) moment identities, exact for polynomial degree <= 15.
  const double m = 0.7, s = 1.3;
  CHECK(gauss_hermite_expectation(rule, m, s, [](double) { return 1.0; }) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gauss_hermite_expectation(rule, m, s, [](double x) { return x; }) ==
        doctest::Approx(m).epsilon(1e-14));
  CHECK(gauss_hermite_expectation(rule, m, s, [](double x) { return x * x; }) ==
        doctest::Approx(m * m + s * s).epsilon(1e-13));
  const double c4 = gauss_hermite_expectation(rule, 0.0, s, [](double x) {
    return x * x * x * x;
  });
  CHECK(c4 == doctest::Approx(3.0 * s * s * s * s).epsilon(1e-13));
}

// Interpolant values frozen from scipy.interpolate.PchipInterpolator.
TEST_CASE("pchip matches reference interpolant") {
  const std::vector<double> xs = {0.0, 1.0, 2.0, 3.0, 5.0};
  const std::vector<double> ys = {0.0, 2.0, 3.0, 3.5, 4.0};
  const auto p = Pchip::fit(xs, ys);
  for (std::size_t k = 0; k < xs.size(); ++k) CHECK(p(xs[k]) == ys[k]);
  CHECK(p(0.5) == doctest::Approx(1.1458333333333335).epsilon(1e-14));
  CHECK(p(1.5) == doctest::Approx(2.583333333333333).epsilon(1e-14));
  CHECK(p(2.25) == doctest::Approx(3.1556490384615383).epsilon(1e-14));
  CHECK(p(4.0) == doctest::Approx(3.815705128205128).epsilon(1e-14));
  // Boundary slopes (three-point end rule) drive linear extrapolation.
  CHECK(p.slope.front() == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(p.slope.back() == doctest::Approx(0.08333333333333331).epsilon(1e-13));
  CHECK(p(-1.0) == doctest::Approx(ys.front() - 2.5).epsilon(1e-13));
  CHECK(p(6.0) == doctest::Approx(ys.back() + 0.08333333333333331).epsilon(1e-13));
  // Monotone data stays monotone through the fit.
  double prev = -1.0;
  for (double t = 0.0; t <= 5.0; t += 0.01) {
    const double v = p(t);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  CHECK(throws_code(ErrorCode::invalid_argument, [] {
    const std::vector<double> bad = {0.0, 0.0, 1.0};
    const std::vector<double> y3 = {1.0, 2.0, 3.0};
    (void)Pchip::fit(bad, y3);
  }));
}

TEST_CASE("value table evaluation, margin band, and csv shape") {
  const auto part = make_uniform_partition(1.0, 2);
  auto grid = make_uniform_grid(-1.0, 1.0, 5);
  ValueTable table(part, grid, 0.1);  // margin = 10% of width = 0.2
  std::vector<double> u(5), v(5);
  for (std::size_t k = 0; k < 5; ++k) {
    u[k] = grid[k] * grid[k];
    v[k] = 2.0 * grid[k];
  }
  for (std::size_t i = 0; i <= 2; ++i) table.set_rows(i, u, v);

  CHECK(table.eval_u(1, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(table.eval_v(1, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  // Inside the margin band evaluation clamps/extrapolates smoothly...
  CHECK(table.eval_u(0, 1.15) > 1.0);
  // ...outside it the checked accessor refuses.
  CHECK(throws_code(ErrorCode::out_of_domain, [&] { (void)table.eval_u(0, 1.5); }));
  CHECK(table.eval_u_unbounded(0, 3.0) > table.eval_u_unbounded(0, 1.2));

  const std::string file = "table_test.csv";
  table.export_csv(file);
  std::FILE* f = std::fopen(file.c_str(), "rb");
  REQUIRE(f != nullptr);
  char buf[256];
  REQUIRE(std::fgets(buf, sizeof buf, f) != nullptr);
  CHECK(std::string(buf) == "step,x,u,v\n");
  std::size_t lines = 0;
  while (std::fgets(buf, sizeof buf, f)) ++lines;
  std::fclose(f);
  CHECK(lines == 3 * 5);
  std::remove(file.c_str());

  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { ValueTable(part, {0.0, 1.0}, 0.1); }));
}

TEST_CASE("one-step conditional expectations reproduce gaussian identities") {
  // Single step of size 0.25 under plain Brownian motion; the step-1 row
  // holds the terminal function.
  const auto spec = unit_brownian_spec();
  const auto part = make_uniform_partition(0.25, 1);
  ValueTable table(part, make_uniform_grid(-8.0, 8.0, 321), 0.25);
  const std::vector<double> db = {0.0};
  const double dt = 0.25;

  std::vector<double> u(table.nodes()), v(table.nodes(), 0.0);

  // Constant row: E[c] = c, Z = 0.
  std::fill(u.begin(), u.end(), 2.5);
  table.set_rows(1, u, v);
  auto pair = quadrature_cond_exp(table, spec.coeffs, 1, dt, db, 0.3, 21);
  CHECK(pair.e_y == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(pair.z == doctest::Approx(0.0).epsilon(1e-10));

  // Identity row: E[X_1 | X_0 = x] = x, Z = 1.
  for (std::size_t k = 0; k < table.nodes(); ++k) u[k] = table.grid()[k];
  table.set_rows(1, u, v);
  pair = quadrature_cond_exp(table, spec.coeffs, 1, dt, db, 0.3, 21);
  CHECK(pair.e_y == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(pair.z == doctest::Approx(1.0).epsilon(1e-9));

  // Quadratic row: E[X_1^2 | X_0 = x] = x^2 + dt, Z = 2x. The interpolant
  // is not exact for curvature, so these hold to the table's O(h^3)
  // interpolation error rather than quadrature precision.
  for (std::size_t k = 0; k < table.nodes(); ++k) u[k] = table.grid()[k] * table.grid()[k];
  table.set_rows(1, u, v);
  pair = quadrature_cond_exp(table, spec.coeffs, 1, dt, db, 0.3, 21);
  CHECK(pair.e_y == doctest::Approx(0.3 * 0.3 + dt).epsilon(5e-4));
  CHECK(pair.z == doctest::Approx(0.6).epsilon(5e-4));

  // A backward-noise coupling adds g(t, x, u(x)) * db to the expectation.
  auto coupled = spec.coeffs;
  coupled.g = [](double, std::span<const double>, double, std::span<double> out) {
    out[0] = 0.7;
  };
  const std::vector<double> db2 = {0.4};
  pair = quadrature_cond_exp(table, coupled, 1, dt, db2, 0.3, 21);
  CHECK(pair.e_y == doctest::Approx(0.3 * 0.3 + dt + 0.7 * 0.4).epsilon(5e-4));

  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)quadrature_cond_exp(table, spec.coeffs, 1, dt, db, 0.3, 2); }));
  CHECK(throws_code(ErrorCode::out_of_domain,
                    [&] { (void)quadrature_cond_exp(table, spec.coeffs, 1, dt, db, 14.0, 21); }));
}

TEST_CASE("backward tables reproduce closed forms for exact presets") {
  for (const char* name : {"constant", "martingale", "linear-g0"}) {
    const auto preset = make_preset(name);
    const auto part = make_uniform_partition(preset.spec.T, 4);
    const auto noise = sample_noise(part, 2, preset.spec.d, preset.spec.l,
                                    BMode::frozen, 19);
    auto grid = make_uniform_grid(preset.grid_lo, preset.grid_hi, 257);
    const auto table = solve_backward_table(preset.spec, noise, grid);
    REQUIRE(preset.has_closed_form());
    for (std::size_t i = 0; i <= 4; ++i) {
      for (double x : {-1.5, -0.25, 0.0, 0.8, 2.0}) {
        const double want = preset.y_exact(part, noise, i, x);
        CHECK(table.eval_u(i, x) == doctest::Approx(want).epsilon(1e-9));
      }
    }
    // Interior z rows match the closed form too (terminal row is seeded
    // with the scheme's zero, checked in the backward-sweep tests).
    for (std::size_t i = 0; i < 4; ++i) {
      for (double x : {-1.0, 0.5}) {
        const double want = preset.z_exact(part, noise, i, x);
        CHECK(table.eval_v(i, x) == doctest::Approx(want).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("backward table rejects unsupported setups") {
  auto spec = unit_brownian_spec();
  const auto part = make_uniform_partition(1.0, 2);
  auto grid = make_uniform_grid(-4.0, 4.0, 65);

  auto noise_pp = sample_noise(part, 2, 1, 1, BMode::per_path, 1);
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)solve_backward_table(spec, noise_pp, grid); }));

  spec.d = 2;
  spec.x0 = {0.0, 0.0};
  auto noise2 = sample_noise(part, 2, 2, 1, BMode::frozen, 1);
  CHECK(throws_code(ErrorCode::unsupported_dimension,
                    [&] { (void)solve_backward_table(spec, noise2, grid); }));
}
