#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdsde/partition.hpp"

namespace bdsde {

// Shape-preserving piecewise-cubic interpolant (Fritsch-Carlson slopes with
// the standard three-point end rule). Outside the abscissae it extrapolates
// linearly with the boundary slope.
struct Pchip {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> slope;

  static Pchip fit(std::span<const double> xs, std::span<const double> ys);
  double operator()(double t) const;
};

// Computes the Fritsch-Carlson node slopes for strictly increasing xs.
std::vector<double> pchip_slopes(std::span<const double> xs, std::span<const double> ys);

double pchip_eval(std::span<const double> xs, std::span<const double> ys,
                  std::span<const double> slopes, double t);

// Grid-sampled decoupled solution fields: u(t_i, x) for Y and v(t_i, x) for
// Z, one row per partition node on a shared 1-d grid. Evaluation clamps to
// a margin band around the grid (linear extrapolation); beyond the band the
// checked accessors refuse. The unbounded accessors extrapolate linearly
// without limit and are meant for intermediate integrals whose Gaussian
// tails leave the grid with negligible weight.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(Partition partition, std::vector<double> grid, double margin_fraction = 0.1);

  const Partition& partition() const { return partition_; }
  const std::vector<double>& grid() const { return grid_; }
  std::size_t nodes() const { return grid_.size(); }
  double margin() const { return margin_width_; }

  void set_rows(std::size_t i, std::span<const double> u_row, std::span<const double> v_row);
  std::span<const double> u_row(std::size_t i) const;
  std::span<const double> v_row(std::size_t i) const;

  double eval_u(std::size_t i, double x) const;
  double eval_v(std::size_t i, double x) const;
  double eval_u_unbounded(std::size_t i, double x) const;
  double eval_v_unbounded(std::size_t i, double x) const;

  void export_csv(const std::string& path) const;

 private:
  void check_domain(double x) const;

  Partition partition_;
  std::vector<double> grid_;
  double margin_width_ = 0.0;
  std::vector<double> u_, v_, du_, dv_;  // (n+1) x nodes, step-major
};

std::vector<double> make_uniform_grid(double lo, double hi, std::size_t count);

}  // namespace bdsde
