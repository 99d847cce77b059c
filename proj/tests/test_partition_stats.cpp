#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/partition.hpp"
#include "bdsde/stats.hpp"

using namespace bdsde;

namespace {

bool throws_code(ErrorCode want, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == want;
  }
  return false;
}

}  // namespace

TEST_CASE("partition basics") {
  const auto p = Partition::from_times({0.0, 0.25, 0.5, 1.0});
  CHECK(p.steps() == 3);
  CHECK(p.T() == 1.0);
  CHECK(p.time(0) == 0.0);
  CHECK(p.time(3) == 1.0);
  CHECK(p.dt(1) == 0.25);
  CHECK(p.dt(3) == 0.5);
  CHECK(p.mesh() == 0.5);

  const auto u = make_uniform_partition(2.0, 8);
  CHECK(u.steps() == 8);
  CHECK(u.T() == 2.0);
  CHECK(u.dt(5) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(u.time(8) == 2.0);  // terminal forced exactly
}

TEST_CASE("partition validation") {
  CHECK(throws_code(ErrorCode::invalid_argument, [] { Partition::from_times({0.0}); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] { Partition::from_times({0.1, 0.5}); }));
  CHECK(throws_code(ErrorCode::invalid_argument,
                    [] { Partition::from_times({0.0, 0.5, 0.5, 1.0}); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] { make_uniform_partition(0.0, 4); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] { make_uniform_partition(-1.0, 4); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] { make_uniform_partition(1.0, 0); }));
}

TEST_CASE("refinement relation and time lookup") {
  const auto coarse = make_uniform_partition(1.0, 4);
  const auto fine = make_uniform_partition(1.0, 8);
  const auto finer = make_uniform_partition(1.0, 16);
  CHECK(fine.refines(coarse));
  CHECK(finer.refines(coarse));
  CHECK(finer.refines(fine));
  CHECK(!coarse.refines(fine));
  CHECK(coarse.refines(coarse));
  const auto shifted = Partition::from_times({0.0, 0.3, 1.0});
  CHECK(!fine.refines(shifted));

  CHECK(fine.index_of(0.0) == 0);
  CHECK(fine.index_of(0.375) == 3);
  CHECK(fine.index_of(1.0) == 8);
  CHECK(throws_code(ErrorCode::invalid_argument, [&] { (void)fine.index_of(0.3); }));

  CHECK(fine.step_index(0.0) == 0);
  CHECK(fine.step_index(0.124) == 0);
  CHECK(fine.step_index(0.125) == 1);
  CHECK(fine.step_index(0.9999) == 7);
  CHECK(fine.step_index(1.0) == 8);
  CHECK(throws_code(ErrorCode::invalid_argument, [&] { (void)fine.step_index(-0.1); }));
  CHECK(throws_code(ErrorCode::invalid_argument, [&] { (void)fine.step_index(1.1); }));
}

TEST_CASE("pairwise sum") {
  std::vector<double> v;
  CHECK(pairwise_sum(v) == 0.0);
  v = {3.5};
  CHECK(pairwise_sum(v) == 3.5);
  // 1..100 in a scrambled-magnitude pattern sums exactly (integers).
  v.clear();
  double expect = 0.0;
  for (int i = 1; i <= 100; ++i) {
    v.push_back(static_cast<double>((i * 37) % 101));
    expect += v.back();
  }
  CHECK(pairwise_sum(v) == expect);
  // Association order is fixed: splitting in halves reproduces the total.
  const double whole = pairwise_sum(v);
  CHECK(whole == pairwise_sum(v));  // pure function of the range
}

TEST_CASE("moments and standard error") {
  std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  CHECK(mean(v) == 2.5);
  CHECK(sample_variance(v) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(standard_error(v) ==
        doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-15));
  CHECK(throws_code(ErrorCode::invalid_argument, [] {
    std::vector<double> e;
    (void)mean(e);
  }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] {
    std::vector<double> one = {1.0};
    (void)sample_variance(one);
  }));
}

TEST_CASE("line fit recovers exact affine data") {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> y;
  for (double xi : x) y.push_back(-1.5 + 2.25 * xi);
  const auto fit = fit_line(x, y);
  CHECK(fit.slope == doctest::Approx(2.25).epsilon(1e-14));
  CHECK(fit.intercept == doctest::Approx(-1.5).epsilon(1e-13));
  CHECK(fit.slope_se == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(throws_code(ErrorCode::invalid_argument, [] {
    std::vector<double> one = {1.0};
    (void)fit_line(one, one);
  }));
  CHECK(throws_code(ErrorCode::invalid_argument, [] {
    std::vector<double> same = {2.0, 2.0, 2.0};
    std::vector<double> y3 = {1.0, 2.0, 3.0};
    (void)fit_line(same, y3);
  }));
}

TEST_CASE("loglog fit recovers power laws") {
  // y = 3 * x^1.5 on meshes 1/4..1/64.
  std::vector<double> x, y;
  for (int n : {4, 8, 16, 32, 64}) {
    x.push_back(1.0 / n);
    y.push_back(3.0 * std::pow(1.0 / n, 1.5));
  }
  const auto fit = fit_loglog(x, y);
  CHECK(fit.slope == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-12));

  CHECK(throws_code(ErrorCode::invalid_input, [] {
    std::vector<double> xs = {0.5, 0.25};
    std::vector<double> ys = {1.0, 0.0};
    (void)fit_loglog(xs, ys);
  }));
}
