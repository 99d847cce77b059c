#include "bdsde/backward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bdsde/csv.hpp"
#include "bdsde/detail/backward_core.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/regression.hpp"

namespace bdsde {

double picard_solve(const DriverFn& f, double t, std::span<const double> x, double e,
                    std::span<const double> z, double dt, double lipschitz_K,
                    const PicardOptions& opts, std::size_t* iters_out) {
  if (!(lipschitz_K * dt < 1.0))
    throw_error(ErrorCode::mesh_too_coarse,
                "picard_solve: K*dt >= 1 breaks the contraction; refine the partition");
  double y = e;
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    const double y_next = e + f(t, x, y, z) * dt;
    const double diff = std::abs(y_next - y);
    y = y_next;
    if (diff <= opts.tol) {
      if (iters_out) *iters_out = it;
      return y;
    }
  }
  throw_error(ErrorCode::no_convergence, "picard_solve: no fixed point within max iterations");
}

double tilde_y(double y_i, double t_i, std::span<const double> x_i,
               std::span<const double> db_i, const CouplingFn& g, std::span<double> g_buf) {
  const std::size_t l = db_i.size();
  g(t_i, x_i, y_i, g_buf.subspan(0, l));
  double v = y_i;
  for (std::size_t k = 0; k < l; ++k) v += g_buf[k] * db_i[k];
  return v;
}

std::vector<double> z_update(const CondExpProvider& provider, const CondExpRequest& req,
                             double dt) {
  if (req.kind != CondExpRequest::Kind::tilde_y_dw)
    throw_error(ErrorCode::invalid_argument, "z_update: request kind must be tilde_y_dw");
  if (!(dt > 0.0)) throw_error(ErrorCode::invalid_argument, "z_update: dt must be positive");
  std::vector<double> out(req.samples());
  try {
    provider.estimate(req, out);
  } catch (const Error& e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " (step %zu)", req.step);
    throw Error(e.code(), e.what() + std::string(buf));
  }
  for (double& v : out) v /= dt;
  return out;
}

double y_update(double e, double t, std::span<const double> x, std::span<const double> z,
                double dt, const CoefficientSet& coeffs, const PicardOptions& opts,
                std::size_t* iters_out) {
  return picard_solve(coeffs.f, t, x, e, z, dt, coeffs.lipschitz_K, opts, iters_out);
}

namespace detail {

BackwardGrid backward_core(const ProblemSpec& spec, const ForwardEnsemble& forward,
                           const NoiseGrid& noise, const CondExpProvider& provider,
                           const SweepOptions& opts, const TruncationLedger* ledger,
                           StepObserver* observer) {
  const std::size_t d = spec.d;
  const std::size_t l = spec.l;
  const std::size_t M = forward.paths;
  const Partition& part = forward.partition;
  const std::size_t n = part.steps();
  if (noise.paths != M || noise.d != d || noise.l != l)
    throw_error(ErrorCode::invalid_argument, "backward_sweep: noise/forward shape mismatch");
  if (ledger && noise.mode != BMode::frozen)
    throw_error(ErrorCode::invalid_argument,
                "backward_sweep: the truncation ledger requires frozen backward noise");

  BackwardGrid grid;
  grid.partition = part;
  grid.d = d;
  grid.paths = M;
  grid.y.resize(M * (n + 1));
  grid.z.assign(M * (n + 1) * d, 0.0);
  grid.picard_iters.assign(n, 0);

  // Terminal assignment, exact.
  run_indexed(M, opts.exec, [&](std::size_t p) {
    grid.y[p * (n + 1) + n] =
        spec.terminal.eval_path({forward.states.data() + p * (n + 1) * d, (n + 1) * d}, d);
  });

  // B prefix values, needed as extra regressors in per-path mode.
  std::vector<double> b_prefix;
  const bool per_path = noise.mode == BMode::per_path;
  if (per_path) {
    b_prefix.assign(M * n * l, 0.0);  // B_{t_i} at [p][i][k], i = 0..n-1
    run_indexed(M, opts.exec, [&](std::size_t p) {
      for (std::size_t i = 1; i < n; ++i) {
        const auto db = noise.db_row(p, i);
        for (std::size_t k = 0; k < l; ++k)
          b_prefix[(p * n + i) * l + k] = b_prefix[(p * n + i - 1) * l + k] + db[k];
      }
    });
  }

  std::vector<double> cond_states(M * d), y_part(M), g_part(M * l), targets(M);
  std::vector<double> zw_targets(M), zw_y_part(M), zw_g_part(M * l);
  std::vector<double> estimates(M), b_states;
  if (per_path) b_states.resize(M * l);
  std::vector<std::size_t> iters(M);

  auto run_provider = [&](const CondExpRequest& req, std::span<double> out, std::size_t step) {
    try {
      provider.estimate(req, out);
    } catch (const Error& e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " (step %zu)", step);
      throw Error(e.code(), e.what() + std::string(buf));
    }
    if (observer) observer->on_estimates(req, out);
  };

  for (std::size_t i = n; i >= 1; --i) {
    const double t_i = part.time(i);
    const double t_prev = part.time(i - 1);
    const double dt = part.dt(i);

    // Integrand pieces at step i: y_i, g(t_i, X_i, y_i), ytilde.
    run_indexed(M, opts.exec, [&](std::size_t p) {
      const double yi = grid.y[p * (n + 1) + i];
      const auto xi = forward.state_row(p, i);
      const auto db = noise.db_row(p, i);
      y_part[p] = yi;
      spec.coeffs.g(t_i, xi, yi, {g_part.data() + p * l, l});
      double ty = yi;
      for (std::size_t k = 0; k < l; ++k) ty += g_part[p * l + k] * db[k];
      targets[p] = ty;
      for (std::size_t k = 0; k < d; ++k)
        cond_states[p * d + k] = forward.state(p, i - 1, k);
    });

    CondExpRequest req;
    req.step = i;
    req.d = d;
    req.l = l;
    req.cond_states = cond_states;
    if (per_path) {
      run_indexed(M, opts.exec, [&](std::size_t p) {
        for (std::size_t k = 0; k < l; ++k)
          b_states[p * l + k] = b_prefix[(p * n + (i - 1)) * l + k];
      });
      req.b_states = b_states;
    } else {
      req.db = noise.db_row(0, i);
    }

    // Z-update first: f consumes Z_{t_{i-1}}.
    for (std::size_t comp = 0; comp < d; ++comp) {
      run_indexed(M, opts.exec, [&](std::size_t p) {
        const double dw = noise.dw(p, i, comp);
        zw_targets[p] = targets[p] * dw;
        zw_y_part[p] = y_part[p] * dw;
        for (std::size_t k = 0; k < l; ++k) zw_g_part[p * l + k] = g_part[p * l + k] * dw;
      });
      CondExpRequest zw_req = req;
      zw_req.kind = CondExpRequest::Kind::tilde_y_dw;
      zw_req.component = comp;
      zw_req.targets = zw_targets;
      zw_req.y_part = zw_y_part;
      zw_req.g_part = zw_g_part;
      run_provider(zw_req, estimates, i);
      run_indexed(M, opts.exec, [&](std::size_t p) {
        double v = estimates[p];
        if (ledger)
          v = truncate(v, TruncationKind::J, i - 1, forward.state_row(p, i - 1), *ledger);
        grid.z[(p * (n + 1) + (i - 1)) * d + comp] = v / dt;
      });
    }

    CondExpRequest y_req = req;
    y_req.kind = CondExpRequest::Kind::tilde_y;
    y_req.targets = targets;
    y_req.y_part = y_part;
    y_req.g_part = g_part;
    run_provider(y_req, estimates, i);

    run_indexed(M, opts.exec, [&](std::size_t p) {
      double e = estimates[p];
      const auto x_prev = forward.state_row(p, i - 1);
      if (ledger) e = truncate(e, TruncationKind::R, i - 1, x_prev, *ledger);
      std::size_t used = 0;
      double yv;
      try {
        yv = picard_solve(spec.coeffs.f, t_prev, x_prev, e,
                          grid.z_row(p, i - 1), dt, spec.coeffs.lipschitz_K, opts.picard, &used);
      } catch (const Error& err) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " (path %zu, step %zu)", p, i);
        throw Error(err.code(), err.what() + std::string(buf));
      }
      if (ledger) yv = truncate(yv, TruncationKind::P, i - 1, x_prev, *ledger);
      grid.y[p * (n + 1) + (i - 1)] = yv;
      iters[p] = used;
    });
    for (std::size_t p = 0; p < M; ++p)
      grid.picard_iters[i - 1] = std::max(grid.picard_iters[i - 1], iters[p]);
  }

  for (double v : grid.y)
    if (!std::isfinite(v))
      throw_error(ErrorCode::numeric_overflow, "backward_sweep: non-finite Y value");
  for (double v : grid.z)
    if (!std::isfinite(v))
      throw_error(ErrorCode::numeric_overflow, "backward_sweep: non-finite Z value");
  return grid;
}

}  // namespace detail

BackwardGrid backward_sweep(const ProblemSpec& spec, const ForwardEnsemble& forward,
                            const NoiseGrid& noise, const CondExpProvider& provider,
                            const SweepOptions& opts) {
  return detail::backward_core(spec, forward, noise, provider, opts, nullptr, nullptr);
}

void export_backward_csv(const BackwardGrid& grid, const std::string& path,
                         std::size_t max_paths) {
  CsvWriter csv(path);
  std::vector<std::string> names{"path_id", "step", "t", "y"};
  for (std::size_t k = 0; k < grid.d; ++k) names.push_back("z_" + std::to_string(k));
  csv.header(names);
  const std::size_t limit = std::min(grid.paths, max_paths);
  for (std::size_t p = 0; p < limit; ++p)
    for (std::size_t i = 0; i <= grid.partition.steps(); ++i) {
      csv.field(p);
      csv.field(i);
      csv.field(grid.partition.time(i));
      csv.field(grid.y_at(p, i));
      for (std::size_t k = 0; k < grid.d; ++k) csv.field(grid.z_at(p, i, k));
      csv.end_row();
    }
}

}  // namespace bdsde
