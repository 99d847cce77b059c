#include "bdsde/partition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bdsde/errors.hpp"

namespace bdsde {

Partition::Partition(std::vector<double> times) : times_(std::move(times)) {
  for (std::size_t i = 1; i < times_.size(); ++i)
    mesh_ = std::max(mesh_, times_[i] - times_[i - 1]);
}

Partition Partition::from_times(std::vector<double> times) {
  if (times.size() < 2)
    throw_error(ErrorCode::invalid_argument, "partition needs at least one step");
  if (times.front() != 0.0)
    throw_error(ErrorCode::invalid_argument, "partition must start at t = 0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] <= times[i - 1])
      throw_error(ErrorCode::invalid_argument,
                  "partition times must be finite and strictly increasing");
  }
  return Partition(std::move(times));
}

bool Partition::refines(const Partition& coarse) const {
  std::size_t j = 0;
  for (double tc : coarse.times_) {
    while (j < times_.size() && times_[j] < tc) ++j;
    if (j == times_.size() || times_[j] != tc) return false;
  }
  return true;
}

std::size_t Partition::index_of(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.end() || *it != t)
    throw_error(ErrorCode::invalid_argument,
                "time " + std::to_string(t) + " is not a partition point");
  return static_cast<std::size_t>(it - times_.begin());
}

std::size_t Partition::step_index(double t) const {
  if (!(t >= 0.0) || !(t <= T()))
    throw_error(ErrorCode::invalid_argument,
                "time " + std::to_string(t) + " outside [0, T]");
  if (t == T()) return steps();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

Partition make_uniform_partition(double T, std::size_t n) {
  if (!(T > 0.0)) throw_error(ErrorCode::invalid_argument, "horizon T must be positive");
  if (n == 0) throw_error(ErrorCode::invalid_argument, "partition needs n >= 1 steps");
  std::vector<double> times(n + 1);
  const double dt = T / static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) times[i] = static_cast<double>(i) * dt;
  times[n] = T;
  return Partition::from_times(std::move(times));
}

}  // namespace bdsde
