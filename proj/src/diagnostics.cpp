#include "bdsde/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bdsde/cond_exp.hpp"
#include "bdsde/csv.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/gauss_hermite.hpp"
#include "bdsde/rng.hpp"
#include "bdsde/value_table.hpp"

namespace bdsde {

void MeasurableConditioner::condition(std::size_t, std::size_t, std::size_t,
                                      std::span<const double> z_node,
                                      std::span<double> out) const {
  std::copy(z_node.begin(), z_node.end(), out.begin());
}

SemigroupConditioner::SemigroupConditioner(const CoefficientSet& coeffs,
                                           const Partition& fine, std::vector<double> grid,
                                           std::vector<double> z_rows,
                                           const ForwardEnsemble& states,
                                           std::size_t gh_order, ExecMode exec)
    : coeffs_(coeffs),
      fine_(fine),
      grid_(std::move(grid)),
      z_rows_(std::move(z_rows)),
      states_(states),
      gh_order_(gh_order),
      exec_(exec) {
  if (states_.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "semigroup conditioning requires d = 1");
  if (states_.partition.steps() != fine_.steps())
    throw_error(ErrorCode::invalid_argument, "conditioning states not on the fine partition");
  if (grid_.size() < 4)
    throw_error(ErrorCode::invalid_argument, "conditioning grid needs at least 4 nodes");
  if (z_rows_.size() != (fine_.steps() + 1) * grid_.size())
    throw_error(ErrorCode::invalid_argument, "z_rows shape mismatch");
}

void SemigroupConditioner::condition(std::size_t, std::size_t fine_node,
                                     std::size_t anchor_node,
                                     std::span<const double> z_node,
                                     std::span<double> out) const {
  if (fine_node < anchor_node || fine_node > fine_.steps())
    throw_error(ErrorCode::invalid_argument, "fine node outside its coarse step");
  const std::size_t g = grid_.size();
  std::vector<double> row(z_rows_.begin() + fine_node * g,
                          z_rows_.begin() + (fine_node + 1) * g);
  const auto& rule = gauss_hermite(gh_order_);
  std::vector<double> next(g);
  double b = 0.0, s = 0.0;
  std::span<double> b_span(&b, 1), s_span(&s, 1);
  for (std::size_t k = fine_node; k > anchor_node; --k) {
    const double t = fine_.time(k - 1);
    const double dt = fine_.dt(k);
    Pchip interp = Pchip::fit(grid_, row);
    for (std::size_t m = 0; m < g; ++m) {
      std::span<const double> x(&grid_[m], 1);
      coeffs_.b(t, x, b_span);
      coeffs_.sigma(t, x, s_span);
      next[m] = gauss_hermite_expectation(rule, grid_[m] + b * dt, s * std::sqrt(dt),
                                          [&](double xp) { return interp(xp); });
    }
    row.swap(next);
  }
  if (fine_node == anchor_node) {
    // Already measurable at the anchor: pass the samples through untouched.
    std::copy(z_node.begin(), z_node.end(), out.begin());
    return;
  }
  Pchip interp = Pchip::fit(grid_, row);
  run_indexed(out.size(), exec_, [&](std::size_t p) {
    out[p] = interp(states_.state(p, anchor_node, 0));
  });
}

namespace {

// Trapezoid node weights of the fine nodes a..b spanning one coarse step.
std::vector<double> trapezoid_weights(const Partition& fine, std::size_t a, std::size_t b) {
  std::vector<double> w(b - a + 1, 0.0);
  for (std::size_t k = a + 1; k <= b; ++k) {
    const double half = 0.5 * fine.dt(k);
    w[k - 1 - a] += half;
    w[k - a] += half;
  }
  return w;
}

std::vector<std::size_t> anchor_indices(const Partition& fine, const Partition& coarse) {
  std::vector<std::size_t> a(coarse.steps() + 1);
  for (std::size_t i = 0; i <= coarse.steps(); ++i) a[i] = fine.index_of(coarse.time(i));
  return a;
}

}  // namespace

std::vector<double> ztilde(std::span<const double> z_samples, std::size_t paths,
                           const Partition& fine, const Partition& coarse,
                           const ZtildeConditioner& conditioner) {
  if (!fine.refines(coarse))
    throw_error(ErrorCode::invalid_argument, "fine partition does not refine the coarse one");
  const std::size_t fn = fine.steps();
  const std::size_t n = coarse.steps();
  if (paths == 0 || z_samples.size() != paths * (fn + 1))
    throw_error(ErrorCode::invalid_argument, "z_samples must be paths x (fine steps + 1)");
  const auto anchors = anchor_indices(fine, coarse);
  std::vector<double> result(paths * n, 0.0);
  std::vector<double> node(paths), cond(paths);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t a = anchors[i - 1];
    const std::size_t b = anchors[i];
    const auto w = trapezoid_weights(fine, a, b);
    const double dt = coarse.dt(i);
    for (std::size_t j = a; j <= b; ++j) {
      for (std::size_t p = 0; p < paths; ++p) node[p] = z_samples[p * (fn + 1) + j];
      conditioner.condition(i, j, a, node, cond);
      const double scale = w[j - a] / dt;
      for (std::size_t p = 0; p < paths; ++p) result[p * n + (i - 1)] += scale * cond[p];
    }
  }
  return result;
}

namespace {

// Grid-sampled reference fields for one level: y and z rows per fine node.
struct ReferenceRows {
  std::vector<double> grid;
  std::vector<double> y_rows;  // (fn+1) x g
  std::vector<double> z_rows;
};

ReferenceRows reference_rows(const Preset& preset, const Partition& fine,
                             const NoiseGrid& noise, const DiagnosticsOptions& opts,
                             ExecMode exec) {
  ReferenceRows out;
  out.grid = make_uniform_grid(preset.grid_lo, preset.grid_hi, opts.grid_nodes);
  const std::size_t g = out.grid.size();
  const std::size_t fn = fine.steps();
  out.y_rows.resize((fn + 1) * g);
  out.z_rows.resize((fn + 1) * g);
  if (preset.has_closed_form()) {
    for (std::size_t j = 0; j <= fn; ++j)
      for (std::size_t k = 0; k < g; ++k) {
        out.y_rows[j * g + k] = preset.y_exact(fine, noise, j, out.grid[k]);
        out.z_rows[j * g + k] = preset.z_exact(fine, noise, j, out.grid[k]);
      }
    return out;
  }
  QuadratureOptions qopts;
  qopts.gh_order = opts.gh_order;
  ValueTable table = solve_backward_table(preset.spec, noise, out.grid, qopts, exec);
  for (std::size_t j = 0; j <= fn; ++j) {
    auto u = table.u_row(j);
    std::copy(u.begin(), u.end(), out.y_rows.begin() + j * g);
    if (j < fn) {
      auto v = table.v_row(j);
      std::copy(v.begin(), v.end(), out.z_rows.begin() + j * g);
    }
  }
  // The scheme seeds Z at the terminal node with 0; the continuous-path
  // stand-in wants the terminal diffusion gradient sigma * h' instead.
  double s = 0.0;
  std::span<double> s_span(&s, 1);
  for (std::size_t k = 0; k < g; ++k) {
    const double x = out.grid[k];
    const double h = 1e-5 * (1.0 + std::abs(x));
    const double xm = x - h, xp = x + h;
    const double dh = (preset.spec.terminal(std::span<const double>(&xp, 1)) -
                       preset.spec.terminal(std::span<const double>(&xm, 1))) /
                      (2.0 * h);
    std::span<const double> xs(&x, 1);
    preset.spec.coeffs.sigma(fine.T(), xs, s_span);
    out.z_rows[fn * g + k] = s * dh;
  }
  return out;
}

}  // namespace

RegularityReport l2_regularity_stat(const Preset& preset,
                                    std::span<const std::size_t> levels,
                                    std::size_t paths, std::uint64_t seed,
                                    const DiagnosticsOptions& opts) {
  if (levels.size() < 2)
    throw_error(ErrorCode::invalid_argument, "regularity study needs at least 2 levels");
  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    if (levels[lv] == 0 || (lv > 0 && levels[lv] <= levels[lv - 1]))
      throw_error(ErrorCode::invalid_argument, "levels must be positive and increasing");
  }
  if (paths < 2)
    throw_error(ErrorCode::invalid_argument, "regularity study needs at least 2 paths");
  if (preset.spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "regularity diagnostics require d = 1");
  if (opts.refine_factor < 2)
    throw_error(ErrorCode::invalid_argument, "refine factor must be at least 2");

  RegularityReport report;
  report.rows.resize(levels.size());
  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    const std::size_t n = levels[lv];
    const Partition coarse = make_uniform_partition(preset.spec.T, n);
    const Partition fine =
        make_uniform_partition(preset.spec.T, n * opts.refine_factor);
    const std::size_t fn = fine.steps();
    const NoiseGrid noise = sample_noise(fine, paths, 1, preset.spec.l, BMode::frozen,
                                         derive_seed(seed, lv), opts.exec);
    const ForwardEnsemble fwd = simulate_forward(preset.spec, noise, opts.exec);
    const ReferenceRows ref = reference_rows(preset, fine, noise, opts, opts.exec);
    const std::size_t g = ref.grid.size();

    // Per-path samples of the reference fields along the simulated paths.
    std::vector<Pchip> y_interp(fn + 1), z_interp(fn + 1);
    for (std::size_t j = 0; j <= fn; ++j) {
      y_interp[j] = Pchip::fit(ref.grid, std::span<const double>(&ref.y_rows[j * g], g));
      z_interp[j] = Pchip::fit(ref.grid, std::span<const double>(&ref.z_rows[j * g], g));
    }
    std::vector<double> y_samples(paths * (fn + 1)), z_samples(paths * (fn + 1));
    run_indexed(paths, opts.exec, [&](std::size_t p) {
      for (std::size_t j = 0; j <= fn; ++j) {
        const double x = fwd.state(p, j, 0);
        y_samples[p * (fn + 1) + j] = y_interp[j](x);
        z_samples[p * (fn + 1) + j] = z_interp[j](x);
      }
    });

    std::vector<double> zt;
    if (opts.candidate == ZtildeKind::conditional_average) {
      const SemigroupConditioner conditioner(preset.spec.coeffs, fine, ref.grid,
                                             ref.z_rows, fwd, opts.gh_order, opts.exec);
      zt = ztilde(z_samples, paths, fine, coarse, conditioner);
    }

    const auto anchors = anchor_indices(fine, coarse);
    std::vector<double> z_stat_p(paths), y_stat_p(paths);
    run_indexed(paths, opts.exec, [&](std::size_t p) {
      const double* zp = z_samples.data() + p * (fn + 1);
      const double* yp = y_samples.data() + p * (fn + 1);
      double z_total = 0.0;
      double y_max = 0.0;
      for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t a = anchors[i - 1];
        const std::size_t b = anchors[i];
        const auto w = trapezoid_weights(fine, a, b);
        const double cand = opts.candidate == ZtildeKind::conditional_average
                                ? zt[p * n + (i - 1)]
                                : zp[a];
        for (std::size_t j = a; j <= b; ++j) {
          const double dz = zp[j] - cand;
          z_total += w[j - a] * dz * dz;
          const double dy = yp[j] - yp[a];
          y_max = std::max(y_max, dy * dy);
        }
      }
      z_stat_p[p] = z_total;
      y_stat_p[p] = y_max;
    });

    RegularityRow& row = report.rows[lv];
    row.n = n;
    row.mesh = coarse.mesh();
    row.z_stat = mean(z_stat_p);
    row.z_stat_se = standard_error(z_stat_p);
    row.y_stat = mean(y_stat_p);
    row.y_stat_se = standard_error(y_stat_p);
    if (!std::isfinite(row.z_stat) || !std::isfinite(row.y_stat))
      throw_error(ErrorCode::numeric_overflow, "non-finite regularity statistic");
    report.fine_mesh = fine.mesh();
  }

  std::vector<double> meshes, zs, ys;
  for (const auto& row : report.rows) {
    meshes.push_back(row.mesh);
    zs.push_back(row.z_stat);
    ys.push_back(row.y_stat);
  }
  const bool z_pos = std::all_of(zs.begin(), zs.end(), [](double v) { return v > 0.0; });
  const bool y_pos = std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; });
  if (z_pos) report.z_slope = fit_loglog(meshes, zs);
  if (y_pos) report.y_slope = fit_loglog(meshes, ys);
  return report;
}

std::vector<double> y_modulus_stat(const Preset& preset,
                                   std::span<const std::size_t> levels,
                                   std::size_t paths, std::uint64_t seed,
                                   const DiagnosticsOptions& opts) {
  const RegularityReport report = l2_regularity_stat(preset, levels, paths, seed, opts);
  std::vector<double> out;
  for (const auto& row : report.rows) out.push_back(row.y_stat);
  return out;
}

void RegularityReport::export_csv(const std::string& path) const {
  CsvWriter csv(path);
  csv.header({"level", "n", "mesh", "z_stat", "z_stat_se", "y_stat", "y_stat_se"});
  for (std::size_t lv = 0; lv < rows.size(); ++lv) {
    const auto& row = rows[lv];
    csv.field(lv);
    csv.field(row.n);
    csv.field(row.mesh);
    csv.field(row.z_stat);
    csv.field(row.z_stat_se);
    csv.field(row.y_stat);
    csv.field(row.y_stat_se);
    csv.end_row();
  }
  csv.field(std::string("z_slope"));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(z_slope.slope);
  csv.field(1.96 * z_slope.slope_se);
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.end_row();
  csv.field(std::string("y_slope"));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(y_slope.slope);
  csv.field(1.96 * y_slope.slope_se);
  csv.end_row();
  csv.field(std::string("fine_mesh"));
  csv.field(std::string(""));
  csv.field(fine_mesh);
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.field(std::string(""));
  csv.end_row();
}

}  // namespace bdsde
