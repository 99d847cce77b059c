#include "bdsde/cond_exp.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>

#include "bdsde/backward.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/gauss_hermite.hpp"
#include "bdsde/rng.hpp"
#include "bdsde/stats.hpp"

namespace bdsde {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrtPi = 0.5641895835477562869;

// Shared integration core: raw moments (E[ytilde], E[ytilde dW]) of the
// step-i table row over dW ~ N(0, dt), for a 1-d problem.
void integrate_step(const ValueTable& table, const CoefficientSet& coeffs, std::size_t step,
                    double dt, std::span<const double> db, double x, std::size_t quad_order,
                    double* e_y, double* e_zw) {
  const Partition& part = table.partition();
  const double t_prev = part.time(step - 1);
  const double t_cur = part.time(step);
  const double x_arr[1] = {x};
  double b_val = 0.0, s_val = 0.0;
  coeffs.b(t_prev, x_arr, {&b_val, 1});
  coeffs.sigma(t_prev, x_arr, {&s_val, 1});
  const double mean = x + b_val * dt;
  const double scale = s_val * std::sqrt(dt);

  const GaussHermiteRule& rule = gauss_hermite(quad_order);
  const std::size_t l = db.size();
  std::vector<double> g_buf(l);
  double acc_y = 0.0, acc_zw = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double dw = std::sqrt(dt) * kSqrt2 * rule.nodes[k];
    const double xp = mean + scale * kSqrt2 * rule.nodes[k];
    const double u = table.eval_u_unbounded(step, xp);
    double ty = u;
    if (l > 0) {
      const double xp_arr[1] = {xp};
      coeffs.g(t_cur, xp_arr, u, g_buf);
      for (std::size_t j = 0; j < l; ++j) ty += g_buf[j] * db[j];
    }
    const double w = rule.weights[k] * kInvSqrtPi;
    acc_y += w * ty;
    acc_zw += w * ty * dw;
  }
  *e_y = acc_y;
  *e_zw = acc_zw;
}

}  // namespace

CondExpPair quadrature_cond_exp(const ValueTable& table, const CoefficientSet& coeffs,
                                std::size_t step, double dt, std::span<const double> db,
                                double x, std::size_t quad_order) {
  if (quad_order < 3)
    throw_error(ErrorCode::invalid_argument, "quadrature_cond_exp: quad order must be >= 3");
  if (step == 0 || step > table.partition().steps())
    throw_error(ErrorCode::invalid_argument, "quadrature_cond_exp: step out of range");
  // Margin policy applies to the conditioning point; the Gaussian image
  // points use unbounded extrapolation (negligible tail mass).
  const auto& grid = table.grid();
  if (!std::isfinite(x) || x < grid.front() - table.margin() ||
      x > grid.back() + table.margin()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "conditioning state x=%.6g outside table domain", x);
    throw_error(ErrorCode::out_of_domain, buf);
  }
  CondExpPair out;
  double e_zw = 0.0;
  integrate_step(table, coeffs, step, dt, db, x, quad_order, &out.e_y, &e_zw);
  out.z = e_zw / dt;
  return out;
}

ValueTable solve_backward_table(const ProblemSpec& spec, const NoiseGrid& noise,
                                std::vector<double> grid, const QuadratureOptions& opts,
                                ExecMode exec) {
  if (spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "quadrature solver requires d = 1");
  if (!spec.terminal.is_pointwise())
    throw_error(ErrorCode::invalid_argument,
                "quadrature solver requires a pointwise terminal function");
  if (noise.mode != BMode::frozen)
    throw_error(ErrorCode::invalid_argument, "quadrature solver requires frozen backward noise");
  const Partition& part = noise.partition;
  const std::size_t n = part.steps();
  const std::size_t m = grid.size();

  ValueTable table(part, std::move(grid), opts.margin_fraction);
  const auto& xs = table.grid();

  std::vector<double> u_row(m), v_row(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) u_row[k] = spec.terminal(std::span{&xs[k], 1});
  table.set_rows(n, u_row, v_row);

  const PicardOptions picard{opts.picard_tol, opts.picard_max};
  for (std::size_t i = n; i >= 1; --i) {
    const double dt = part.dt(i);
    const auto db = noise.db_row(0, i);
    run_indexed(m, exec, [&](std::size_t k) {
      double e_y = 0.0, e_zw = 0.0;
      integrate_step(table, spec.coeffs, i, dt, db, xs[k], opts.gh_order, &e_y, &e_zw);
      const double z = e_zw / dt;
      u_row[k] = picard_solve(spec.coeffs.f, part.time(i - 1), {&xs[k], 1}, e_y, {&z, 1}, dt,
                              spec.coeffs.lipschitz_K, picard);
      v_row[k] = z;
    });
    table.set_rows(i - 1, u_row, v_row);
  }
  return table;
}

QuadratureProvider::QuadratureProvider(const ProblemSpec& spec, const NoiseGrid& noise,
                                       std::vector<double> grid, const QuadratureOptions& opts,
                                       ExecMode exec)
    : spec_(spec),
      table_(solve_backward_table(spec, noise, std::move(grid), opts, exec)),
      opts_(opts),
      exec_(exec) {
  const std::size_t n = noise.partition.steps();
  db_.resize(n * noise.l);
  for (std::size_t i = 1; i <= n; ++i) {
    const auto row = noise.db_row(0, i);
    for (std::size_t k = 0; k < noise.l; ++k) db_[(i - 1) * noise.l + k] = row[k];
  }
}

void QuadratureProvider::estimate(const CondExpRequest& req, std::span<double> out) const {
  if (req.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "quadrature provider requires d = 1");
  const std::size_t l = spec_.l;
  const double dt = table_.partition().dt(req.step);
  const std::span<const double> db{db_.data() + (req.step - 1) * l, l};
  run_indexed(req.samples(), exec_, [&](std::size_t p) {
    double e_y = 0.0, e_zw = 0.0;
    const double x = req.cond_states[p];
    const auto& grid = table_.grid();
    if (!std::isfinite(x) || x < grid.front() - table_.margin() ||
        x > grid.back() + table_.margin()) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "conditioning state x=%.6g outside table domain", x);
      throw_error(ErrorCode::out_of_domain, buf);
    }
    integrate_step(table_, spec_.coeffs, req.step, dt, db, x, opts_.gh_order, &e_y, &e_zw);
    out[p] = req.kind == CondExpRequest::Kind::tilde_y ? e_y : e_zw;
  });
}

namespace {

struct NestedCtx {
  const ProblemSpec* spec = nullptr;
  const Partition* part = nullptr;
  std::vector<double> db;  // n x l frozen increments
  std::size_t inner = 0;
  std::uint64_t budget = 0;
  std::atomic<std::uint64_t>* evals = nullptr;
  PicardOptions picard;
};

struct NestedMoments {
  double e_y = 0.0;
  double e_zw = 0.0;
  double se_y = 0.0;
  double se_zw = 0.0;
};

double nested_y(NestedCtx& ctx, std::size_t i, double x, std::uint64_t seed);

// Outer averages of (ytilde, ytilde*dW) over fresh one-step noise from
// conditioning step i (integrand step i+1).
NestedMoments nested_moments(NestedCtx& ctx, std::size_t i, double x, std::uint64_t seed) {
  const std::size_t j = i + 1;  // integrand step
  const Partition& part = *ctx.part;
  const double dt = part.dt(j);
  const double t_i = part.time(i);
  const double t_j = part.time(j);
  const double sqrt_dt = std::sqrt(dt);
  const std::size_t l = ctx.spec->l;

  const double x_arr[1] = {x};
  double b_val = 0.0, s_val = 0.0;
  ctx.spec->coeffs.b(t_i, x_arr, {&b_val, 1});
  ctx.spec->coeffs.sigma(t_i, x_arr, {&s_val, 1});

  const StreamKey key{seed, stream_purpose::nested};
  std::vector<double> g_buf(l), ty(ctx.inner), tyw(ctx.inner);
  for (std::size_t s = 0; s < ctx.inner; ++s) {
    if (ctx.evals->fetch_add(1, std::memory_order_relaxed) >= ctx.budget)
      throw_error(ErrorCode::resource_limit, "nested_mc_cond_exp: simulation budget exceeded");
    const double dw = sqrt_dt * normal_draw(key, s, j, 0, 0);
    const double xp = x + b_val * dt + s_val * dw;
    const double yp = nested_y(ctx, j, xp, derive_seed(seed, s + 1));
    const double xp_arr[1] = {xp};
    double v = yp;
    if (l > 0) {
      ctx.spec->coeffs.g(t_j, xp_arr, yp, g_buf);
      for (std::size_t k = 0; k < l; ++k) v += g_buf[k] * ctx.db[(j - 1) * l + k];
    }
    ty[s] = v;
    tyw[s] = v * dw;
  }
  NestedMoments m;
  m.e_y = mean(ty);
  m.e_zw = mean(tyw);
  m.se_y = standard_error(ty);
  m.se_zw = standard_error(tyw);
  return m;
}

double nested_y(NestedCtx& ctx, std::size_t i, double x, std::uint64_t seed) {
  const std::size_t n = ctx.part->steps();
  if (i == n) return ctx.spec->terminal(std::span{&x, 1});
  const NestedMoments m = nested_moments(ctx, i, x, seed);
  const double dt = ctx.part->dt(i + 1);
  const double z = m.e_zw / dt;
  return picard_solve(ctx.spec->coeffs.f, ctx.part->time(i), {&x, 1}, m.e_y, {&z, 1}, dt,
                      ctx.spec->coeffs.lipschitz_K, ctx.picard);
}

std::vector<double> frozen_db(const Partition& part, std::size_t l, std::uint64_t seed) {
  const std::size_t n = part.steps();
  std::vector<double> db(n * l);
  const StreamKey bkey{seed, stream_purpose::backward_b};
  for (std::size_t i = 1; i <= n; ++i) {
    const double s = std::sqrt(part.dt(i));
    for (std::size_t k = 0; k < l; ++k) db[(i - 1) * l + k] = s * normal_draw(bkey, 0, i, k, 0);
  }
  return db;
}

}  // namespace

NestedMcResult nested_mc_cond_exp(const ProblemSpec& spec, const Partition& partition,
                                  std::uint64_t noise_seed, std::size_t step, double x,
                                  std::size_t inner_paths, const NestedMcOptions& opts) {
  if (spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "nested_mc_cond_exp requires d = 1");
  if (!spec.terminal.is_pointwise())
    throw_error(ErrorCode::invalid_argument,
                "nested_mc_cond_exp requires a pointwise terminal function");
  if (inner_paths < 100)
    throw_error(ErrorCode::invalid_argument, "nested_mc_cond_exp: need >= 100 inner paths");
  if (step >= partition.steps())
    throw_error(ErrorCode::invalid_argument,
                "nested_mc_cond_exp: conditioning step must be < n");

  std::atomic<std::uint64_t> evals{0};
  NestedCtx ctx;
  ctx.spec = &spec;
  ctx.part = &partition;
  ctx.db = frozen_db(partition, spec.l, noise_seed);
  ctx.inner = inner_paths;
  ctx.budget = opts.budget;
  ctx.evals = &evals;
  ctx.picard = PicardOptions{opts.picard_tol, opts.picard_max};

  const std::uint64_t root = derive_seed(noise_seed, 0x6d63 + step);
  const NestedMoments m = nested_moments(ctx, step, x, root);
  const double dt = partition.dt(step + 1);
  NestedMcResult res;
  res.e_y = m.e_y;
  res.z = m.e_zw / dt;
  res.se_y = m.se_y;
  res.se_z = m.se_zw / dt;
  res.evals = evals.load();
  return res;
}

NestedMcProvider::NestedMcProvider(const ProblemSpec& spec, const Partition& partition,
                                   std::uint64_t noise_seed, std::size_t inner_paths,
                                   const NestedMcOptions& opts)
    : spec_(spec),
      partition_(partition),
      noise_seed_(noise_seed),
      inner_paths_(inner_paths),
      opts_(opts) {
  if (spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension, "nested-mc provider requires d = 1");
}

void NestedMcProvider::estimate(const CondExpRequest& req, std::span<double> out) const {
  std::atomic<std::uint64_t> evals{0};
  NestedCtx ctx;
  ctx.spec = &spec_;
  ctx.part = &partition_;
  ctx.db = frozen_db(partition_, spec_.l, noise_seed_);
  ctx.inner = inner_paths_;
  ctx.budget = opts_.budget;
  ctx.evals = &evals;
  ctx.picard = PicardOptions{opts_.picard_tol, opts_.picard_max};

  const std::uint64_t step_root = derive_seed(noise_seed_, 0x6d63 + req.step);
  run_indexed(req.samples(), ExecMode::parallel, [&](std::size_t p) {
    NestedCtx local = ctx;  // shares the eval counter via pointer
    local.evals = &evals;
    const NestedMoments m =
        nested_moments(local, req.step - 1, req.cond_states[p], derive_seed(step_root, p + 1));
    out[p] = req.kind == CondExpRequest::Kind::tilde_y ? m.e_y : m.e_zw;
  });
}

}  // namespace bdsde
