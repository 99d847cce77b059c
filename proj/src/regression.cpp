#include "bdsde/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "bdsde/csv.hpp"
#include "bdsde/detail/backward_core.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/stats.hpp"

namespace bdsde {

namespace {

// Exponent tuples of total degree <= degree over dim variables, graded
// lexicographic; the constant term comes first.
std::vector<std::vector<unsigned>> monomial_exponents(std::size_t dim, std::size_t degree) {
  std::vector<std::vector<unsigned>> out;
  std::vector<unsigned> cur(dim, 0);
  for (std::size_t total = 0; total <= degree; ++total) {
    // enumerate compositions of `total` into dim parts
    std::function<void(std::size_t, unsigned)> rec = [&](std::size_t pos, unsigned left) {
      if (pos + 1 == dim) {
        cur[pos] = left;
        out.push_back(cur);
        return;
      }
      for (unsigned e = 0; e <= left; ++e) {
        cur[pos] = e;
        rec(pos + 1, left - e);
      }
    };
    rec(0, static_cast<unsigned>(total));
  }
  return out;
}

void ensure_eigen_serial() {
  static const bool once = [] {
    Eigen::setNbThreads(1);
    return true;
  }();
  (void)once;
}

std::vector<double> fit_polynomial(std::span<const double> targets,
                                   std::span<const double> regressors, std::size_t dim,
                                   const RegressionSpec& spec) {
  ensure_eigen_serial();
  const std::size_t M = targets.size();
  const auto exps = monomial_exponents(dim, spec.degree);
  const std::size_t B = exps.size();

  // Standardize coordinates for conditioning; the span is unchanged, so
  // fitted predictions are unaffected.
  std::vector<double> shift(dim, 0.0), scale(dim, 1.0);
  for (std::size_t k = 0; k < dim; ++k) {
    double s = 0.0;
    for (std::size_t p = 0; p < M; ++p) s += regressors[p * dim + k];
    shift[k] = s / static_cast<double>(M);
    double v = 0.0;
    for (std::size_t p = 0; p < M; ++p) {
      const double dvi = regressors[p * dim + k] - shift[k];
      v += dvi * dvi;
    }
    const double sd = std::sqrt(v / static_cast<double>(M));
    if (sd > 0.0) scale[k] = sd;
  }

  Eigen::MatrixXd A(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(B));
  std::vector<double> powers(dim);
  for (std::size_t p = 0; p < M; ++p) {
    for (std::size_t j = 0; j < B; ++j) {
      double v = 1.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double xk = (regressors[p * dim + k] - shift[k]) / scale[k];
        for (unsigned e = 0; e < exps[j][k]; ++e) v *= xk;
      }
      A(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = v;
    }
  }
  Eigen::Map<const Eigen::VectorXd> t(targets.data(), static_cast<Eigen::Index>(M));

  Eigen::VectorXd coef;
  if (spec.ridge > 0.0) {
    Eigen::MatrixXd gram = A.transpose() * A;
    gram.diagonal().array() += spec.ridge;
    coef = gram.ldlt().solve(A.transpose() * t);
  } else {
    coef = A.completeOrthogonalDecomposition().solve(t);
  }
  Eigen::VectorXd pred = A * coef;
  return std::vector<double>(pred.data(), pred.data() + M);
}

std::vector<double> fit_bins(std::span<const double> targets,
                             std::span<const double> regressors, std::size_t dim,
                             const RegressionSpec& spec) {
  if (dim != 1)
    throw_error(ErrorCode::unsupported_dimension,
                "lsmc_fit: piecewise bins support one regressor only");
  const std::size_t M = targets.size();
  const auto [lo_it, hi_it] = std::minmax_element(regressors.begin(), regressors.end());
  const double lo = *lo_it, hi = *hi_it;
  const std::size_t nb = spec.bins;
  std::vector<double> sum(nb, 0.0);
  std::vector<double> cnt(nb, 0.0);
  std::vector<std::size_t> which(M);
  const double width = hi > lo ? (hi - lo) / static_cast<double>(nb) : 1.0;
  for (std::size_t p = 0; p < M; ++p) {
    std::size_t b =
        hi > lo ? static_cast<std::size_t>((regressors[p] - lo) / width) : std::size_t{0};
    if (b >= nb) b = nb - 1;
    which[p] = b;
    sum[b] += targets[p];
    cnt[b] += 1.0;
  }
  std::vector<double> out(M);
  for (std::size_t p = 0; p < M; ++p) {
    const std::size_t b = which[p];
    out[p] = cnt[b] > 0.0 ? sum[b] / (cnt[b] + spec.ridge) : 0.0;
  }
  return out;
}

}  // namespace

std::vector<double> lsmc_fit(std::span<const double> targets,
                             std::span<const double> regressors, std::size_t dim,
                             const RegressionSpec& spec) {
  const std::size_t M = targets.size();
  if (M == 0 || dim == 0 || regressors.size() != M * dim)
    throw_error(ErrorCode::invalid_argument, "lsmc_fit: shape mismatch");
  if (spec.bins < 1) throw_error(ErrorCode::invalid_argument, "lsmc_fit: bins must be >= 1");
  if (!(spec.ridge >= 0.0))
    throw_error(ErrorCode::invalid_argument, "lsmc_fit: ridge must be non-negative");
  for (std::size_t p = 0; p < M; ++p)
    if (!std::isfinite(targets[p])) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "lsmc_fit: non-finite target at index %zu", p);
      throw_error(ErrorCode::invalid_input, buf);
    }
  for (std::size_t j = 0; j < regressors.size(); ++j)
    if (!std::isfinite(regressors[j])) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "lsmc_fit: non-finite regressor at index %zu", j / dim);
      throw_error(ErrorCode::invalid_input, buf);
    }
  return spec.basis == RegressionSpec::Basis::polynomial
             ? fit_polynomial(targets, regressors, dim, spec)
             : fit_bins(targets, regressors, dim, spec);
}

double TruncationLedger::r_bound(std::size_t i, double x_sq) const {
  const double a = db_norm[i];  // |dB_{i+1}|
  const double quad = (1.0 + 2.0 * C * mesh) * ((1.0 + C * a) * q[i + 1] + C * a);
  return quad * x_sq + (1.0 + C * a) * c[i + 1] + 6.0 * C * C * mesh * (1.0 + 2.0 * C * a);
}

double TruncationLedger::j_bound(std::size_t i, double x_sq) const {
  const double a = db_norm[i];
  const double root = std::sqrt(mesh);
  const double quad = root * (1.0 + 2.0 * C * mesh) * ((1.0 + C * a) * q[i + 1] + C * a);
  return quad * x_sq + root * (1.0 + C * a) * c[i + 1] +
         6.0 * C * C * mesh * (1.0 + 2.0 * C * a);
}

void TruncationLedger::export_csv(const std::string& path) const {
  CsvWriter csv(path);
  csv.header({"step", "t", "c_i", "q_i"});
  for (std::size_t i = 0; i < c.size(); ++i) {
    csv.field(i);
    csv.field(partition.time(i));
    csv.field(c[i]);
    csv.field(q[i]);
    csv.end_row();
  }
}

TruncationLedger truncation_ledger(const Partition& partition, std::span<const double> db,
                                   std::size_t l, double C) {
  if (!(C > 0.0)) throw_error(ErrorCode::invalid_argument, "truncation_ledger: C must be > 0");
  const std::size_t n = partition.steps();
  if (db.size() != n * l)
    throw_error(ErrorCode::invalid_argument, "truncation_ledger: dB shape mismatch");
  const double mesh = partition.mesh();
  if (!(C * mesh < 1.0))
    throw_error(ErrorCode::mesh_too_coarse,
                "truncation_ledger: C*|pi| >= 1; refine the partition");

  TruncationLedger ledger;
  ledger.C = C;
  ledger.mesh = mesh;
  ledger.partition = partition;
  ledger.c.assign(n + 1, 0.0);
  ledger.q.assign(n + 1, 0.0);
  ledger.db_norm.assign(n, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
      const double v = db[(i - 1) * l + k];
      acc += v * v;
    }
    ledger.db_norm[i - 1] = std::sqrt(acc);
  }
  ledger.q[n] = C;
  ledger.c[n] = 2.0 * C;
  const double D = std::sqrt(1.0 + C * C * mesh) / (1.0 - C * mesh);
  for (std::size_t i = n; i >= 1; --i) {
    const double a = ledger.db_norm[i - 1];  // |dB_i| seen from step i-1
    ledger.q[i - 1] =
        D * ((1.0 + 2.0 * C * mesh) * ((1.0 + C * a) * ledger.q[i] + C * a) + C * mesh);
    ledger.c[i - 1] = D * ((1.0 + C * a) * ledger.c[i] +
                           6.0 * C * C * mesh * (1.0 + 2.0 * C * a) + 3.0 * C * mesh);
  }
  return ledger;
}

double truncate(double value, TruncationKind kind, std::size_t i, std::span<const double> x,
                const TruncationLedger& ledger) {
  if (i >= ledger.c.size() || (kind != TruncationKind::P && i + 1 >= ledger.c.size()))
    throw_error(ErrorCode::invalid_argument, "truncate: step outside the ledger");
  double x_sq = 0.0;
  for (double v : x) x_sq += v * v;
  double bound = 0.0;
  switch (kind) {
    case TruncationKind::P: bound = ledger.p_bound(i, x_sq); break;
    case TruncationKind::R: bound = ledger.r_bound(i, x_sq); break;
    case TruncationKind::J: bound = ledger.j_bound(i, x_sq); break;
  }
  return std::clamp(value, -bound, bound);
}

void RegressionProvider::estimate(const CondExpRequest& req, std::span<double> out) const {
  const std::size_t M = req.samples();
  const bool joint = spec_.regressors == RegressionSpec::Regressors::x_and_b;
  if (joint && req.b_states.empty())
    throw_error(ErrorCode::invalid_argument,
                "regression provider: (X, B) regressors requested but no B states supplied");

  std::vector<double> design;
  std::span<const double> regressors = req.cond_states;
  std::size_t dim = req.d;
  if (joint) {
    dim = req.d + req.l;
    design.resize(M * dim);
    for (std::size_t p = 0; p < M; ++p) {
      for (std::size_t k = 0; k < req.d; ++k)
        design[p * dim + k] = req.cond_states[p * req.d + k];
      for (std::size_t k = 0; k < req.l; ++k)
        design[p * dim + req.d + k] = req.b_states[p * req.l + k];
    }
    regressors = design;
  }

  const bool split = !joint && !req.db.empty() && req.y_part.size() == M &&
                     req.g_part.size() == M * req.l;
  if (split) {
    // Frozen-B: fit the Y and g contributions separately and recombine with
    // the known increment.
    std::vector<double> fit = lsmc_fit(req.y_part, regressors, dim, spec_);
    std::copy(fit.begin(), fit.end(), out.begin());
    std::vector<double> g_col(M);
    for (std::size_t k = 0; k < req.l; ++k) {
      for (std::size_t p = 0; p < M; ++p) g_col[p] = req.g_part[p * req.l + k];
      fit = lsmc_fit(g_col, regressors, dim, spec_);
      for (std::size_t p = 0; p < M; ++p) out[p] += req.db[k] * fit[p];
    }
    return;
  }
  const std::vector<double> fit = lsmc_fit(req.targets, regressors, dim, spec_);
  std::copy(fit.begin(), fit.end(), out.begin());
}

BackwardGrid regression_sweep(const ProblemSpec& spec, const ForwardEnsemble& forward,
                              const NoiseGrid& noise, const RegressionSpec& reg_spec,
                              const TruncationLedger& ledger, const SweepOptions& opts,
                              const CondExpProvider* override_provider) {
  if (override_provider)
    return detail::backward_core(spec, forward, noise, *override_provider, opts, &ledger,
                                 nullptr);
  RegressionProvider provider(reg_spec);
  return detail::backward_core(spec, forward, noise, provider, opts, &ledger, nullptr);
}

namespace {

class GapObserver : public detail::StepObserver {
 public:
  GapObserver(const CondExpProvider& approx, double p, std::size_t steps)
      : approx_(approx), p_(p), gap_y_(steps + 1, 0.0), gap_zw_(steps + 1, 0.0) {}

  void on_estimates(const CondExpRequest& req, std::span<const double> oracle_est) override {
    const std::size_t M = oracle_est.size();
    buf_.resize(M);
    approx_.estimate(req, buf_);
    std::vector<double> powed(M);
    for (std::size_t s = 0; s < M; ++s)
      powed[s] = std::pow(std::abs(buf_[s] - oracle_est[s]), p_);
    const double lp = std::pow(mean(powed), 1.0 / p_);
    if (req.kind == CondExpRequest::Kind::tilde_y)
      gap_y_[req.step] = lp;
    else
      gap_zw_[req.step] = std::max(gap_zw_[req.step], lp);
  }

  const std::vector<double>& gap_y() const { return gap_y_; }
  const std::vector<double>& gap_zw() const { return gap_zw_; }

 private:
  const CondExpProvider& approx_;
  double p_;
  std::vector<double> buf_;
  std::vector<double> gap_y_, gap_zw_;
};

}  // namespace

ErrorProbeReport regression_error_probe(const ProblemSpec& spec, const ForwardEnsemble& forward,
                                        const NoiseGrid& noise, const CondExpProvider& oracle,
                                        const CondExpProvider& approx, double p, double C,
                                        const SweepOptions& opts) {
  if (spec.d != 1)
    throw_error(ErrorCode::unsupported_dimension,
                "regression_error_probe: the oracle requires d = 1");
  if (!(p >= 1.0))
    throw_error(ErrorCode::invalid_argument, "regression_error_probe: need moment order >= 1");

  GapObserver observer(approx, p, forward.partition.steps());
  detail::backward_core(spec, forward, noise, oracle, opts, nullptr, &observer);

  ErrorProbeReport report;
  report.p = p;
  report.paths = forward.paths;
  double worst = 0.0;
  for (std::size_t i = 1; i <= forward.partition.steps(); ++i) {
    ErrorProbeRow row;
    row.step = i;
    row.gap_y = observer.gap_y()[i];
    row.gap_zw = observer.gap_zw()[i];
    worst = std::max({worst, row.gap_y, row.gap_zw});
    report.rows.push_back(row);
  }
  report.aggregate = (C / forward.partition.mesh()) * worst;
  return report;
}

void ErrorProbeReport::export_csv(const std::string& path) const {
  CsvWriter csv(path);
  csv.header({"step", "gap_y_lp", "gap_zw_lp", "p", "m"});
  for (const auto& row : rows) {
    csv.field(row.step);
    csv.field(row.gap_y);
    csv.field(row.gap_zw);
    csv.field(p);
    csv.field(paths);
    csv.end_row();
  }
}

std::unique_ptr<CondExpProvider> make_provider(ProviderKind kind, const ProblemSpec& spec,
                                               const NoiseGrid& noise,
                                               const ProviderConfig& config) {
  switch (kind) {
    case ProviderKind::quadrature:
      if (spec.d != 1)
        throw_error(ErrorCode::unsupported_dimension,
                    "make_provider: quadrature supports d = 1 only");
      if (config.grid.size() < 4)
        throw_error(ErrorCode::invalid_argument, "make_provider: quadrature grid required");
      return std::make_unique<QuadratureProvider>(spec, noise, config.grid, config.quadrature);
    case ProviderKind::nested_mc:
      return std::make_unique<NestedMcProvider>(spec, noise.partition, noise.seed,
                                                config.inner_paths, config.nested);
    case ProviderKind::regression:
      return std::make_unique<RegressionProvider>(config.regression);
  }
  throw_error(ErrorCode::invalid_argument, "make_provider: unknown provider kind");
}

}  // namespace bdsde
