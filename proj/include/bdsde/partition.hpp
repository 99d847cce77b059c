#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bdsde {

// Time partition 0 = t_0 < t_1 < ... < t_n = T. States are indexed 0..n;
// increments, steps and their sizes are indexed 1..n (step i covers
// [t_{i-1}, t_i]), matching the scheme's backward recursion.
class Partition {
public:
  // Trivial single-step partition of [0, 1]; carriers that embed a
  // Partition default to this and are re-assigned before use.
  Partition() : Partition(std::vector<double>{0.0, 1.0}) {}

  static Partition from_times(std::vector<double> times);

  double T() const { return times_.back(); }
  std::size_t steps() const { return times_.size() - 1; }  // n
  double time(std::size_t i) const { return times_[i]; }
  double dt(std::size_t i) const { return times_[i] - times_[i - 1]; }  // i in 1..n
  double mesh() const { return mesh_; }
  std::span<const double> times() const { return times_; }

  // True when every time of `coarse` appears in this partition (exact
  // floating-point match; uniform dyadic refinements are exact by
  // construction).
  bool refines(const Partition& coarse) const;

  // Index of the exact time t in this partition, or throws invalid-argument.
  std::size_t index_of(double t) const;

  // Step-process index: largest i with t_i <= t, except step_index(T) = n so
  // the piecewise-constant path closes at the terminal state. Throws
  // invalid-argument outside [0, T].
  std::size_t step_index(double t) const;

private:
  explicit Partition(std::vector<double> times);

  std::vector<double> times_;
  double mesh_ = 0.0;
};

// Uniform partition of [0, T] with n steps; t_i = i*(T/n) and t_n forced to
// T exactly. Throws invalid-argument when T <= 0 or n == 0.
Partition make_uniform_partition(double T, std::size_t n);

}  // namespace bdsde
