#include "bdsde/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bdsde/csv.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/rng.hpp"
#include "bdsde/stats.hpp"

namespace bdsde {

void euler_step(const CoefficientSet& coeffs, double t, double dt,
                std::span<const double> x, std::span<const double> dw,
                std::span<double> x_next, std::span<double> b_buf,
                std::span<double> sigma_buf) {
  const std::size_t d = x.size();
  coeffs.b(t, x, b_buf.subspan(0, d));
  coeffs.sigma(t, x, sigma_buf.subspan(0, d * d));
  for (std::size_t k = 0; k < d; ++k) {
    double v = x[k] + b_buf[k] * dt;
    for (std::size_t j = 0; j < d; ++j) v += sigma_buf[k * d + j] * dw[j];
    x_next[k] = v;
  }
}

ForwardEnsemble simulate_forward(const ProblemSpec& spec, const NoiseGrid& noise,
                                 ExecMode exec) {
  const std::size_t d = spec.d;
  if (noise.d != d)
    throw_error(ErrorCode::invalid_argument, "simulate_forward: noise dimension mismatch");
  if (spec.x0.size() != d)
    throw_error(ErrorCode::invalid_argument, "simulate_forward: x0 dimension mismatch");
  const Partition& part = noise.partition;
  const std::size_t n = part.steps();

  ForwardEnsemble ens;
  ens.partition = part;
  ens.d = d;
  ens.paths = noise.paths;
  ens.states.resize(noise.paths * (n + 1) * d);

  run_indexed(noise.paths, exec, [&](std::size_t p) {
    std::vector<double> b_buf(d), sigma_buf(d * d);
    auto x0_row = ens.state_row(p, 0);
    std::copy(spec.x0.begin(), spec.x0.end(), x0_row.begin());
    for (std::size_t i = 1; i <= n; ++i) {
      euler_step(spec.coeffs, part.time(i - 1), part.dt(i), ens.state_row(p, i - 1),
                 noise.dw_row(p, i), ens.state_row(p, i), b_buf, sigma_buf);
      for (double v : ens.state_row(p, i))
        if (!std::isfinite(v)) {
          char buf[96];
          std::snprintf(buf, sizeof buf, "non-finite forward state (path %zu, step %zu)", p, i);
          throw_error(ErrorCode::numeric_overflow, buf);
        }
    }
  });
  return ens;
}

double verify_recursion(const ProblemSpec& spec, const ForwardEnsemble& ens,
                        const NoiseGrid& noise) {
  const std::size_t d = ens.d;
  const std::size_t n = ens.partition.steps();
  double worst = 0.0;
  std::vector<double> b_buf(d), sigma_buf(d * d), next(d);
  for (std::size_t p = 0; p < ens.paths; ++p) {
    for (std::size_t k = 0; k < d; ++k)
      worst = std::max(worst, std::abs(ens.state(p, 0, k) - spec.x0[k]));
    for (std::size_t i = 1; i <= n; ++i) {
      euler_step(spec.coeffs, ens.partition.time(i - 1), ens.partition.dt(i),
                 ens.state_row(p, i - 1), noise.dw_row(p, i), next, b_buf, sigma_buf);
      for (std::size_t k = 0; k < d; ++k)
        worst = std::max(worst, std::abs(ens.state(p, i, k) - next[k]));
    }
  }
  return worst;
}

std::span<const double> step_process_eval(const ForwardEnsemble& ens, std::size_t p,
                                          double t) {
  // step_index maps t in [t_{i-1}, t_i) to the left node i-1 and T to n.
  return ens.state_row(p, ens.partition.step_index(t));
}

std::vector<StrongErrorRow> forward_strong_error(const ProblemSpec& spec,
                                                 std::span<const std::size_t> levels,
                                                 std::size_t paths, std::uint64_t seed,
                                                 ExecMode exec) {
  if (levels.size() < 2)
    throw_error(ErrorCode::invalid_argument, "forward_strong_error: need at least 2 levels");
  for (std::size_t lv = 1; lv < levels.size(); ++lv)
    if (levels[lv] <= levels[lv - 1])
      throw_error(ErrorCode::invalid_argument, "forward_strong_error: levels must increase");

  // One noise family: sample on the coarsest mesh, then bridge down through
  // every level and finally to the reference mesh, so all levels are coupled.
  std::vector<Partition> parts;
  for (std::size_t n : levels) parts.push_back(make_uniform_partition(spec.T, n));
  const Partition ref_part = make_uniform_partition(spec.T, levels.back() * 4);

  std::vector<NoiseGrid> noises;
  noises.push_back(sample_noise(parts[0], paths, spec.d, spec.l, BMode::frozen, seed, exec));
  for (std::size_t lv = 1; lv < levels.size(); ++lv)
    noises.push_back(brownian_bridge_refine(noises.back(), parts[lv],
                                            derive_seed(seed, lv), exec));
  const NoiseGrid ref_noise =
      brownian_bridge_refine(noises.back(), ref_part, derive_seed(seed, levels.size()), exec);

  const ForwardEnsemble ref = simulate_forward(spec, ref_noise, exec);

  std::vector<StrongErrorRow> rows;
  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    const ForwardEnsemble ens = simulate_forward(spec, noises[lv], exec);
    const std::size_t n = levels[lv];
    std::vector<double> sq(paths);
    run_indexed(paths, exec, [&](std::size_t p) {
      double worst = 0.0;
      for (std::size_t i = 0; i <= n; ++i) {
        const std::size_t ri = ref_part.index_of(parts[lv].time(i));
        double acc = 0.0;
        for (std::size_t k = 0; k < spec.d; ++k) {
          const double dv = ens.state(p, i, k) - ref.state(p, ri, k);
          acc += dv * dv;
        }
        worst = std::max(worst, acc);
      }
      sq[p] = worst;
    });
    const double m = mean(sq);
    const double se = standard_error(sq);
    StrongErrorRow row;
    row.steps = n;
    row.mesh = parts[lv].mesh();
    row.rmse = std::sqrt(m);
    // Delta method: se(sqrt(m)) ~= se(m) / (2 sqrt(m)).
    row.rmse_se = m > 0.0 ? se / (2.0 * std::sqrt(m)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void export_forward_csv(const ForwardEnsemble& ens, const std::string& path,
                        std::size_t max_paths) {
  CsvWriter csv(path);
  std::vector<std::string> names{"path_id", "step", "t"};
  for (std::size_t k = 0; k < ens.d; ++k) names.push_back("x_" + std::to_string(k));
  csv.header(names);
  const std::size_t limit = std::min(ens.paths, max_paths);
  for (std::size_t p = 0; p < limit; ++p)
    for (std::size_t i = 0; i <= ens.partition.steps(); ++i) {
      csv.field(p);
      csv.field(i);
      csv.field(ens.partition.time(i));
      for (std::size_t k = 0; k < ens.d; ++k) csv.field(ens.state(p, i, k));
      csv.end_row();
    }
}

}  // namespace bdsde
