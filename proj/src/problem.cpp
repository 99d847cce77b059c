#include "bdsde/problem.hpp"

#include <algorithm>
#include <cmath>

#include "bdsde/errors.hpp"
#include "bdsde/rng.hpp"

namespace bdsde {

TerminalCondition TerminalCondition::pointwise(PointwiseFn h) {
  if (!h) throw_error(ErrorCode::invalid_argument, "terminal condition must be callable");
  TerminalCondition tc;
  tc.h_ = std::move(h);
  return tc;
}

TerminalCondition TerminalCondition::path_functional(PathFn h) {
  if (!h) throw_error(ErrorCode::invalid_argument, "terminal condition must be callable");
  TerminalCondition tc;
  tc.h_path_ = std::move(h);
  return tc;
}

double TerminalCondition::operator()(std::span<const double> x) const {
  if (!h_)
    throw_error(ErrorCode::invalid_argument,
                "pointwise evaluation of a path-functional terminal condition");
  return h_(x);
}

double TerminalCondition::eval_path(std::span<const double> path, std::size_t d) const {
  if (h_) return h_(path.subspan(path.size() - d));
  return h_path_(path, d);
}

double ValidationReport::worst() const {
  double w = std::max({max_ratio_b, max_ratio_sigma, max_ratio_f, max_ratio_g,
                       max_ratio_terminal, max_origin_bound});
  return std::max(w, gradient_sum_max);
}

bool ValidationReport::pass(double K) const { return worst() <= K * (1.0 + tolerance); }

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct ProbeRng {
  StreamKey key;
  std::uint64_t probe = 0;
  std::uint64_t draw = 0;

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform_draw(key, probe, draw++, 0, 0);
  }

  void fill_state(std::span<double> x, double center_lo, double center_hi) {
    for (double& v : x) v = uniform(center_lo, center_hi);
  }
};

}  // namespace

ValidationReport validate_assumptions(const ProblemSpec& spec, std::size_t probes,
                                      std::uint64_t seed, const ProbeBox& box) {
  if (probes == 0) throw_error(ErrorCode::invalid_argument, "need at least one probe");
  if (spec.x0.size() != spec.d)
    throw_error(ErrorCode::invalid_argument, "x0 dimension mismatch");

  const std::size_t d = spec.d;
  const std::size_t l = spec.l;
  ValidationReport rep;
  rep.probes = probes;

  std::vector<double> x1(d), x2(d), b1(d), b2(d);
  std::vector<double> s1(d * d), s2(d * d);
  std::vector<double> g1(l), g2(l);
  std::vector<double> z1(d), z2(d);
  std::vector<double> zero_x(d, 0.0), zero_z(d, 0.0);

  auto lo = [&](std::size_t k) { return spec.x0[k] - box.x_radius; };
  auto hi = [&](std::size_t k) { return spec.x0[k] + box.x_radius; };

  for (std::size_t p = 0; p < probes; ++p) {
    ProbeRng rng{{seed, stream_purpose::probe}, p, 0};
    const double t1 = rng.uniform(0.0, spec.T);
    const double t2 = rng.uniform(0.0, spec.T);
    for (std::size_t k = 0; k < d; ++k) {
      x1[k] = rng.uniform(lo(k), hi(k));
      x2[k] = rng.uniform(lo(k), hi(k));
      z1[k] = rng.uniform(-box.z_radius, box.z_radius);
      z2[k] = rng.uniform(-box.z_radius, box.z_radius);
    }
    const double y1 = rng.uniform(-box.y_radius, box.y_radius);
    const double y2 = rng.uniform(-box.y_radius, box.y_radius);

    std::vector<double> dx(d);
    for (std::size_t k = 0; k < d; ++k) dx[k] = x1[k] - x2[k];
    const double dist_x = norm2(dx);

    // b and sigma: spatial Lipschitz at a common time.
    if (dist_x > 0.0) {
      spec.coeffs.b(t1, x1, b1);
      spec.coeffs.b(t1, x2, b2);
      for (std::size_t k = 0; k < d; ++k) b1[k] -= b2[k];
      rep.max_ratio_b = std::max(rep.max_ratio_b, norm2(b1) / dist_x);

      spec.coeffs.sigma(t1, x1, s1);
      spec.coeffs.sigma(t1, x2, s2);
      for (std::size_t k = 0; k < d * d; ++k) s1[k] -= s2[k];
      rep.max_ratio_sigma = std::max(rep.max_ratio_sigma, norm2(s1) / dist_x);

      if (spec.terminal.is_pointwise()) {
        const double dh = spec.terminal(x1) - spec.terminal(x2);
        rep.max_ratio_terminal = std::max(rep.max_ratio_terminal, std::fabs(dh) / dist_x);
      }
    }

    // f and g: joint Lipschitz including the time argument.
    double dz = 0.0;
    for (std::size_t k = 0; k < d; ++k) dz += (z1[k] - z2[k]) * (z1[k] - z2[k]);
    const double dist_f =
        std::sqrt((t1 - t2) * (t1 - t2) + dist_x * dist_x + (y1 - y2) * (y1 - y2) + dz);
    if (dist_f > 0.0) {
      const double df = spec.coeffs.f(t1, x1, y1, z1) - spec.coeffs.f(t2, x2, y2, z2);
      rep.max_ratio_f = std::max(rep.max_ratio_f, std::fabs(df) / dist_f);
    }
    const double dist_g =
        std::sqrt((t1 - t2) * (t1 - t2) + dist_x * dist_x + (y1 - y2) * (y1 - y2));
    if (dist_g > 0.0) {
      spec.coeffs.g(t1, x1, y1, g1);
      spec.coeffs.g(t2, x2, y2, g2);
      for (std::size_t k = 0; k < l; ++k) g1[k] -= g2[k];
      rep.max_ratio_g = std::max(rep.max_ratio_g, norm2(g1) / dist_g);
    }

    // Growth at the origin.
    spec.coeffs.b(t1, zero_x, b1);
    spec.coeffs.sigma(t1, zero_x, s1);
    spec.coeffs.g(t1, zero_x, 0.0, g1);
    const double f0 = spec.coeffs.f(t1, zero_x, 0.0, zero_z);
    rep.max_origin_bound = std::max(
        {rep.max_origin_bound, norm2(b1), norm2(s1), norm2(g1), std::fabs(f0)});
  }

  // Path functionals: finite-difference gradient-sum bound on probe paths.
  if (!spec.terminal.is_pointwise()) {
    const std::size_t states = std::max<std::size_t>(box.path_states, 2);
    const double fd = 1e-5;
    std::vector<double> path(states * d);
    for (std::size_t p = 0; p < probes; ++p) {
      ProbeRng rng{{seed, stream_purpose::probe}, p, 1000};
      for (std::size_t k = 0; k < states * d; ++k)
        path[k] = rng.uniform(lo(k % d), hi(k % d));
      double grad_sum = 0.0;
      for (std::size_t k = 0; k < states * d; ++k) {
        const double saved = path[k];
        path[k] = saved + fd;
        const double up = spec.terminal.eval_path(path, d);
        path[k] = saved - fd;
        const double dn = spec.terminal.eval_path(path, d);
        path[k] = saved;
        grad_sum += std::fabs(up - dn) / (2.0 * fd);
      }
      rep.gradient_sum_max = std::max(rep.gradient_sum_max, grad_sum);
    }
  }

  return rep;
}

}  // namespace bdsde
