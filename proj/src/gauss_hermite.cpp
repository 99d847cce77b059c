#include "bdsde/gauss_hermite.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>

#include "bdsde/errors.hpp"

namespace bdsde {

namespace {

GaussHermiteRule compute_rule(std::size_t order) {
  // Jacobi matrix of the Hermite recurrence: zero diagonal, off-diagonal
  // beta_k = sqrt(k/2). Nodes are its eigenvalues; weights are
  // sqrt(pi) * (first eigenvector component)^2.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(order),
                                            static_cast<Eigen::Index>(order));
  for (std::size_t k = 1; k < order; ++k) {
    const double beta = std::sqrt(static_cast<double>(k) / 2.0);
    J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = beta;
    J(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
  if (solver.info() != Eigen::Success)
    throw_error(ErrorCode::no_convergence, "gauss_hermite: eigensolver failed");

  const double sqrt_pi = std::sqrt(M_PI);
  GaussHermiteRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (std::size_t k = 0; k < order; ++k) {
    rule.nodes[k] = solver.eigenvalues()(static_cast<Eigen::Index>(k));
    const double v0 = solver.eigenvectors()(0, static_cast<Eigen::Index>(k));
    rule.weights[k] = sqrt_pi * v0 * v0;
  }
  // Enforce the exact symmetry the recurrence implies; the eigensolver
  // breaks it at the last-ulp level.
  for (std::size_t k = 0; k < order / 2; ++k) {
    const std::size_t m = order - 1 - k;
    const double node = 0.5 * (rule.nodes[m] - rule.nodes[k]);
    rule.nodes[k] = -node;
    rule.nodes[m] = node;
    const double w = 0.5 * (rule.weights[k] + rule.weights[m]);
    rule.weights[k] = w;
    rule.weights[m] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(std::size_t order) {
  if (order == 0 || order > 512)
    throw_error(ErrorCode::invalid_argument, "gauss_hermite: order must be in [1, 512]");
  static std::mutex mu;
  static std::map<std::size_t, GaussHermiteRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_rule(order)).first;
  return it->second;
}

}  // namespace bdsde
