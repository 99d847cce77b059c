#include "bdsde/value_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>

#include "bdsde/csv.hpp"
#include "bdsde/errors.hpp"

namespace bdsde {

namespace {

int sgn(double v) { return (v > 0.0) - (v < 0.0); }

double edge_slope(double h0, double h1, double m0, double m1) {
  const double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
  if (sgn(d) != sgn(m0)) return 0.0;
  if (sgn(m0) != sgn(m1) && std::abs(d) > 3.0 * std::abs(m0)) return 3.0 * m0;
  return d;
}

}  // namespace

std::vector<double> pchip_slopes(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n)
    throw_error(ErrorCode::invalid_argument, "pchip_slopes: need >= 2 matching points");
  for (std::size_t k = 1; k < n; ++k)
    if (!(xs[k] > xs[k - 1]))
      throw_error(ErrorCode::invalid_argument, "pchip_slopes: abscissae must increase");

  std::vector<double> h(n - 1), m(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = xs[k + 1] - xs[k];
    m[k] = (ys[k + 1] - ys[k]) / h[k];
  }
  std::vector<double> d(n, 0.0);
  if (n == 2) {
    d[0] = d[1] = m[0];
    return d;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (m[k - 1] * m[k] > 0.0) {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
    }
  }
  d[0] = edge_slope(h[0], h[1], m[0], m[1]);
  d[n - 1] = edge_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
  return d;
}

double pchip_eval(std::span<const double> xs, std::span<const double> ys,
                  std::span<const double> slopes, double t) {
  const std::size_t n = xs.size();
  if (t <= xs[0]) return ys[0] + slopes[0] * (t - xs[0]);
  if (t >= xs[n - 1]) return ys[n - 1] + slopes[n - 1] * (t - xs[n - 1]);
  const std::size_t k =
      static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin()) - 1;
  const double h = xs[k + 1] - xs[k];
  const double s = (t - xs[k]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * ys[k] + h10 * h * slopes[k] + h01 * ys[k + 1] + h11 * h * slopes[k + 1];
}

Pchip Pchip::fit(std::span<const double> xs, std::span<const double> ys) {
  Pchip p;
  p.x.assign(xs.begin(), xs.end());
  p.y.assign(ys.begin(), ys.end());
  p.slope = pchip_slopes(xs, ys);
  return p;
}

double Pchip::operator()(double t) const { return pchip_eval(x, y, slope, t); }

ValueTable::ValueTable(Partition partition, std::vector<double> grid, double margin_fraction)
    : partition_(std::move(partition)), grid_(std::move(grid)) {
  if (grid_.size() < 4)
    throw_error(ErrorCode::invalid_argument, "ValueTable: grid needs >= 4 nodes");
  for (std::size_t k = 1; k < grid_.size(); ++k)
    if (!(grid_[k] > grid_[k - 1]))
      throw_error(ErrorCode::invalid_argument, "ValueTable: grid must increase");
  if (!(margin_fraction >= 0.0))
    throw_error(ErrorCode::invalid_argument, "ValueTable: margin must be non-negative");
  margin_width_ = margin_fraction * (grid_.back() - grid_.front());
  const std::size_t rows = partition_.steps() + 1;
  u_.assign(rows * grid_.size(), 0.0);
  v_.assign(rows * grid_.size(), 0.0);
  du_.assign(rows * grid_.size(), 0.0);
  dv_.assign(rows * grid_.size(), 0.0);
}

void ValueTable::set_rows(std::size_t i, std::span<const double> u_row,
                          std::span<const double> v_row) {
  const std::size_t m = grid_.size();
  if (i > partition_.steps() || u_row.size() != m || v_row.size() != m)
    throw_error(ErrorCode::invalid_argument, "ValueTable::set_rows: bad row shape");
  std::copy(u_row.begin(), u_row.end(), u_.begin() + static_cast<std::ptrdiff_t>(i * m));
  std::copy(v_row.begin(), v_row.end(), v_.begin() + static_cast<std::ptrdiff_t>(i * m));
  const auto su = pchip_slopes(grid_, u_row);
  const auto sv = pchip_slopes(grid_, v_row);
  std::copy(su.begin(), su.end(), du_.begin() + static_cast<std::ptrdiff_t>(i * m));
  std::copy(sv.begin(), sv.end(), dv_.begin() + static_cast<std::ptrdiff_t>(i * m));
}

std::span<const double> ValueTable::u_row(std::size_t i) const {
  return {u_.data() + i * grid_.size(), grid_.size()};
}

std::span<const double> ValueTable::v_row(std::size_t i) const {
  return {v_.data() + i * grid_.size(), grid_.size()};
}

void ValueTable::check_domain(double x) const {
  if (!std::isfinite(x) || x < grid_.front() - margin_width_ ||
      x > grid_.back() + margin_width_) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "value table evaluated at x=%.6g outside [%.6g, %.6g] (+margin %.3g)", x,
                  grid_.front(), grid_.back(), margin_width_);
    throw_error(ErrorCode::out_of_domain, buf);
  }
}

double ValueTable::eval_u(std::size_t i, double x) const {
  check_domain(x);
  return eval_u_unbounded(i, x);
}

double ValueTable::eval_v(std::size_t i, double x) const {
  check_domain(x);
  return eval_v_unbounded(i, x);
}

double ValueTable::eval_u_unbounded(std::size_t i, double x) const {
  const std::size_t m = grid_.size();
  return pchip_eval(grid_, {u_.data() + i * m, m}, {du_.data() + i * m, m}, x);
}

double ValueTable::eval_v_unbounded(std::size_t i, double x) const {
  const std::size_t m = grid_.size();
  return pchip_eval(grid_, {v_.data() + i * m, m}, {dv_.data() + i * m, m}, x);
}

void ValueTable::export_csv(const std::string& path) const {
  CsvWriter csv(path);
  csv.header({"step", "x", "u", "v"});
  for (std::size_t i = 0; i <= partition_.steps(); ++i)
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      csv.field(i);
      csv.field(grid_[k]);
      csv.field(u_[i * grid_.size() + k]);
      csv.field(v_[i * grid_.size() + k]);
      csv.end_row();
    }
}

std::vector<double> make_uniform_grid(double lo, double hi, std::size_t count) {
  if (!(hi > lo) || count < 2)
    throw_error(ErrorCode::invalid_argument, "make_uniform_grid: need hi > lo and count >= 2");
  std::vector<double> g(count);
  const double h = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) g[k] = lo + h * static_cast<double>(k);
  g.back() = hi;
  return g;
}

}  // namespace bdsde
