#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "bdsde/diagnostics.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/noise.hpp"
#include "bdsde/partition.hpp"
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

}  // namespace

TEST_CASE("conditional time-average reproduces constants and linear ramps") {
  const MeasurableConditioner cond;

  // A constant Z averages to itself on every coarse step.
  const auto fine8 = make_uniform_partition(1.0, 8);
  const auto coarse2 = make_uniform_partition(1.0, 2);
  const std::size_t paths = 3;
  std::vector<double> z(paths * 9, 0.7);
  const auto zt = ztilde(z, paths, fine8, coarse2, cond);
  REQUIRE(zt.size() == paths * 2);
  for (double v : zt) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));

  // Z_s = s over a single coarse interval [0, 1]: the trapezoid average is
  // exactly T/2 (every term is an exact dyadic here).
  const auto fine16 = make_uniform_partition(1.0, 16);
  const auto coarse1 = make_uniform_partition(1.0, 1);
  std::vector<double> ramp(17);
  for (std::size_t j = 0; j <= 16; ++j) ramp[j] = fine16.time(j);
  const auto half = ztilde(ramp, 1, fine16, coarse1, cond);
  REQUIRE(half.size() == 1);
  CHECK(half[0] == 0.5);

  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    (void)ztilde(z, paths, make_uniform_partition(1.0, 6), make_uniform_partition(1.0, 4),
                 cond);
  }));
  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    std::vector<double> bad(paths * 9 - 1, 0.0);
    (void)ztilde(bad, paths, fine8, coarse2, cond);
  }));
}

TEST_CASE("time-averaging beats the left endpoint as a projection candidate") {
  // For the deterministic ramp Z_s = s on [0, 1] the trapezoid dispersion
  // around the average (1/2) is 1/12 + the O(delta^2) lattice term, while the
  // dispersion around the left endpoint (0) is 1/3 + the same term. The
  // average must win by the squared gap, exactly 1/4.
  const auto fine = make_uniform_partition(1.0, 16);
  const auto coarse = make_uniform_partition(1.0, 1);
  std::vector<double> ramp(17);
  for (std::size_t j = 0; j <= 16; ++j) ramp[j] = fine.time(j);
  const auto avg = ztilde(ramp, 1, fine, coarse, MeasurableConditioner{})[0];

  auto dispersion = [&](double cand) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= 16; ++j) {
      const double w = (j == 0 || j == 16) ? 0.5 : 1.0;
      acc += w * (ramp[j] - cand) * (ramp[j] - cand) / 16.0;
    }
    return acc;
  };
  CHECK(dispersion(avg) < dispersion(ramp[0]));
  CHECK(dispersion(ramp[0]) - dispersion(avg) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("semigroup conditioning recovers the martingale projection of 2x") {
  // Forward chain is a standard Brownian path (b = 0, sigma = 1), so the
  // one-step propagation of the linear row 2x is again 2x: conditioning any
  // fine node on the coarse-left state must return 2 * X_anchor, and the
  // trapezoid average inherits that value.
  const auto preset = make_preset("xsq");
  const std::size_t r = 4, n_coarse = 2, paths = 64;
  const auto fine = make_uniform_partition(1.0, n_coarse * r);
  const auto coarse = make_uniform_partition(1.0, n_coarse);
  const auto noise = sample_noise(fine, paths, 1, 1, BMode::frozen, 71);
  const auto fwd = simulate_forward(preset.spec, noise);

  const auto grid = make_uniform_grid(-8.0, 8.0, 257);
  std::vector<double> z_rows((n_coarse * r + 1) * grid.size());
  for (std::size_t j = 0; j <= n_coarse * r; ++j)
    for (std::size_t k = 0; k < grid.size(); ++k)
      z_rows[j * grid.size() + k] = 2.0 * grid[k];

  const SemigroupConditioner cond(preset.spec.coeffs, fine, grid, z_rows, fwd);
  std::vector<double> z_samples(paths * (n_coarse * r + 1));
  for (std::size_t p = 0; p < paths; ++p)
    for (std::size_t j = 0; j <= n_coarse * r; ++j)
      z_samples[p * (n_coarse * r + 1) + j] = 2.0 * fwd.state(p, j, 0);

  const auto zt = ztilde(z_samples, paths, fine, coarse, cond);
  REQUIRE(zt.size() == paths * n_coarse);
  for (std::size_t p = 0; p < paths; ++p) {
    CHECK(zt[p * n_coarse + 0] ==
          doctest::Approx(2.0 * fwd.state(p, 0, 0)).epsilon(1e-8));
    CHECK(zt[p * n_coarse + 1] ==
          doctest::Approx(2.0 * fwd.state(p, r, 0)).epsilon(1e-8));
  }

  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    (void)SemigroupConditioner(preset.spec.coeffs, coarse, grid, z_rows, fwd);
  }));
  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    (void)SemigroupConditioner(preset.spec.coeffs, fine, {0.0, 1.0, 2.0}, z_rows, fwd);
  }));
  CHECK(throws_code(ErrorCode::invalid_argument, [&] {
    std::vector<double> short_rows(grid.size(), 0.0);
    (void)SemigroupConditioner(preset.spec.coeffs, fine, grid, short_rows, fwd);
  }));
}

TEST_CASE("dispersion statistics vanish identically for the constant solution") {
  const auto preset = make_preset("constant");
  const std::vector<std::size_t> levels = {4, 8};
  const auto report = l2_regularity_stat(preset, levels, 256, 11);
  REQUIRE(report.rows.size() == 2);
  for (const auto& row : report.rows) {
    CHECK(row.z_stat == 0.0);
    CHECK(row.y_stat == 0.0);
  }
}

TEST_CASE("dispersion statistic matches 2 T mesh for the squared Brownian value") {
  // Y = x^2 + (T - t) makes Z = 2 W, whose step dispersion integrates to
  // exactly 2 T |pi| in expectation, trapezoid rule included (the integrand
  // is linear in s). Each level must sit within 5 standard errors and the
  // fitted slope close to one.
  const auto preset = make_preset("xsq");
  const std::vector<std::size_t> levels = {4, 8, 16};
  const std::size_t paths = 2000;
  const auto report = l2_regularity_stat(preset, levels, paths, 29);
  REQUIRE(report.rows.size() == 3);
  for (std::size_t lv = 0; lv < 3; ++lv) {
    const auto& row = report.rows[lv];
    CHECK(row.n == levels[lv]);
    CHECK(row.mesh == doctest::Approx(1.0 / static_cast<double>(levels[lv])));
    const double want = 2.0 * 1.0 / static_cast<double>(levels[lv]);
    CHECK(row.z_stat_se > 0.0);
    CHECK(std::abs(row.z_stat - want) < 5.0 * row.z_stat_se);
    if (lv > 0) {
      CHECK(row.z_stat < report.rows[lv - 1].z_stat);
      CHECK(row.y_stat < report.rows[lv - 1].y_stat);
    }
  }
  CHECK(report.z_slope.slope > 0.85);
  CHECK(report.z_slope.slope < 1.15);
  CHECK(report.fine_mesh == doctest::Approx(1.0 / 64.0));

  const std::string path = "build/test_regularity_rows.csv";
  report.export_csv(path);
  std::ifstream in(path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header == "level,n,mesh,z_stat,z_stat_se,y_stat,y_stat_se");
  // Three per-level rows, then the z_slope / y_slope / fine_mesh summaries.
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  REQUIRE(lines.size() == 6);
  CHECK(lines[3].rfind("z_slope,", 0) == 0);
  CHECK(lines[4].rfind("y_slope,", 0) == 0);
  CHECK(lines[5].rfind("fine_mesh,", 0) == 0);
  std::remove(path.c_str());
}

TEST_CASE("left-endpoint candidate never beats the conditional average") {
  const auto preset = make_preset("geometric");
  const std::vector<std::size_t> levels = {4, 8};
  DiagnosticsOptions opts;
  const auto avg = l2_regularity_stat(preset, levels, 1500, 31, opts);
  opts.candidate = ZtildeKind::left_endpoint;
  const auto left = l2_regularity_stat(preset, levels, 1500, 31, opts);
  for (std::size_t lv = 0; lv < 2; ++lv) {
    const double guard =
        5.0 * (avg.rows[lv].z_stat_se + left.rows[lv].z_stat_se);
    CHECK(left.rows[lv].z_stat >= avg.rows[lv].z_stat - guard);
  }
}

TEST_CASE("y modulus column is consistent and decreases under refinement") {
  const auto preset = make_preset("xsq");
  const std::vector<std::size_t> levels = {4, 8};
  DiagnosticsOptions opts;
  const auto report = l2_regularity_stat(preset, levels, 400, 13, opts);
  const auto column = y_modulus_stat(preset, levels, 400, 13, opts);
  REQUIRE(column.size() == 2);
  CHECK(column[0] == report.rows[0].y_stat);
  CHECK(column[1] == report.rows[1].y_stat);
  CHECK(column[1] < column[0]);

  const std::vector<std::size_t> one = {4};
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)y_modulus_stat(preset, one, 400, 13); }));
  const std::vector<std::size_t> unordered = {8, 4};
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)l2_regularity_stat(preset, unordered, 400, 13); }));
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)l2_regularity_stat(preset, levels, 1, 13); }));
  DiagnosticsOptions bad;
  bad.refine_factor = 1;
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [&] { (void)l2_regularity_stat(preset, levels, 400, 13, bad); }));
}
