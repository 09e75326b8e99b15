#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "convsense/errors.hpp"
#include "convsense/model_sparse.hpp"
#include "convsense/structured_operator.hpp"

/* Reconstruction algorithms.
 *
 * feedforward_reconstruct computes x_hat = W^T M(W x, k): convolution,
 * structured sparse approximation (max pooling + upsampling), transposed
 * convolution. It is exactly one iteration of model_iht started from zero,
 * and model_iht with max_iters == 1 returns the bitwise-identical result.
 *
 * ista_l1 solves  min_z ||x - W^T z||_2^2 + lambda * ||z||_1  by proximal
 * gradient with a fixed step 1/L, L an upper bound on the top eigenvalue
 * of W W^T from power iteration. recover_activation is the three-step
 * support-restricted recovery built on it.
 */

namespace convsense {

struct IhtConfig {
  int sparsity = 0;
  int max_iters = 1;
  double residual_tol = 0.0;  // stop when ||x - W^T z|| / ||x|| <= tol
  PoolingGeometry pooling = PoolingGeometry::full_block();
  Upsampling upsampling = Upsampling::kSwitches;
};

struct FeedforwardResult {
  Eigen::VectorXd x_hat;
  ModelSparseSignal z_hat;
};

inline FeedforwardResult feedforward_reconstruct(const StructuredOperator& op,
                                                 const Eigen::VectorXd& x, int k,
                                                 const PoolingLayout& layout,
                                                 Upsampling upsampling) {
  if (layout.grid().size() != op.rows())
    throw DimensionMismatch("feedforward_reconstruct: layout does not match the operator");
  auto [pooled, switches] = max_pool(op.forward(x), layout);
  keep_top_k(pooled, k);
  ModelSparseSignal z_hat;
  z_hat.coeffs = upsampling == Upsampling::kSwitches ? upsample(pooled, switches, layout)
                                                     : upsample_naive(pooled, layout);
  z_hat.support = detail::support_of(z_hat.coeffs, layout.grid());
  z_hat.sparsity = k;
  FeedforwardResult result;
  result.x_hat = op.adjoint_sparse(z_hat);
  result.z_hat = std::move(z_hat);
  return result;
}

struct IhtResult {
  ModelSparseSignal z_hat;
  int iterations = 0;
  std::vector<double> residual_history;  // ||x - W^T z_i|| / ||x|| per iteration
};

inline IhtResult model_iht(const StructuredOperator& op, const Eigen::VectorXd& x,
                           const IhtConfig& config) {
  if (config.max_iters < 1) throw InvalidArgument("model_iht: max_iters must be >= 1");
  if (config.residual_tol < 0.0)
    throw InvalidArgument("model_iht: residual_tol must be nonnegative");
  if (x.size() != op.cols()) throw DimensionMismatch("model_iht: input length != col count");
  const PoolingLayout layout(op.grid(), config.pooling);

  const double x_norm = x.norm();
  IhtResult result;
  result.z_hat.coeffs = Eigen::VectorXd::Zero(op.rows());
  result.z_hat.sparsity = config.sparsity;
  Eigen::VectorXd residual = x;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    // Sensing matrix is W^T, so the gradient step applies W.
    Eigen::VectorXd b = result.z_hat.coeffs + op.forward(residual);
    auto [pooled, switches] = max_pool(b, layout);
    keep_top_k(pooled, config.sparsity);
    result.z_hat.coeffs = config.upsampling == Upsampling::kSwitches
                              ? upsample(pooled, switches, layout)
                              : upsample_naive(pooled, layout);
    result.z_hat.support = detail::support_of(result.z_hat.coeffs, layout.grid());
    residual = x - op.adjoint_sparse(result.z_hat);
    result.iterations = iter + 1;
    const double rel = x_norm > 0.0 ? residual.norm() / x_norm : 0.0;
    result.residual_history.push_back(rel);
    if (rel <= config.residual_tol) break;
  }
  return result;
}

struct LassoConfig {
  double lambda = 0.0;       // must be positive; see default_lambda
  int max_iters = 1000;
  double objective_tol = 1e-10;  // relative objective decrease threshold
  int power_iters = 50;
};

// The data-scaled default: 0.1 * ||W x||_inf.
inline double default_lambda(const StructuredOperator& op, const Eigen::VectorXd& x) {
  return 0.1 * op.forward(x).cwiseAbs().maxCoeff();
}

// Upper bound on the top eigenvalue of W W^T: 50 power-iteration steps from
// a fixed seeded start, inflated by 1%. Deterministic across calls.
inline double operator_gram_bound(const StructuredOperator& op, int power_iters = 50) {
  RngStream stream(0x5EEDF00DULL, 0);
  Eigen::VectorXd v(op.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = stream.gaussian();
  const double v0 = v.norm();
  if (v0 == 0.0) return 0.0;
  v /= v0;
  double eigenvalue = 0.0;
  for (int i = 0; i < power_iters; ++i) {
    Eigen::VectorXd next = op.forward(op.adjoint(v));
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    eigenvalue = v.dot(next);
    v = next / norm;
  }
  return eigenvalue * 1.01;
}

struct IstaResult {
  Eigen::VectorXd z;
  std::vector<double> objective_history;
  int iterations = 0;
  double step_bound = 0.0;  // the L used for the fixed step
};

// Allowed-support mask; empty means unconstrained. Entries with mask 0 are
// pinned to zero every iterate.
using SupportMask = std::vector<std::uint8_t>;

inline IstaResult ista_l1(const StructuredOperator& op, const Eigen::VectorXd& x,
                          const LassoConfig& config, const SupportMask& mask = {}) {
  if (x.size() != op.cols()) throw DimensionMismatch("ista_l1: input length != col count");
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != op.rows())
    throw DimensionMismatch("ista_l1: mask length != row count");
  if (config.lambda <= 0.0) throw InvalidArgument("ista_l1: lambda must be positive");
  if (config.max_iters < 1) throw InvalidArgument("ista_l1: max_iters must be >= 1");

  IstaResult result;
  result.z = Eigen::VectorXd::Zero(op.rows());
  const double L = operator_gram_bound(op, config.power_iters);
  result.step_bound = L;
  if (L <= 0.0) return result;  // zero operator: objective is constant in z
  const double threshold = config.lambda / (2.0 * L);

  auto objective = [&](const Eigen::VectorXd& z) {
    return (x - op.adjoint(z)).squaredNorm() + config.lambda * z.lpNorm<1>();
  };

  double prev = objective(result.z);
  for (int iter = 0; iter < config.max_iters; ++iter) {
    const Eigen::VectorXd gradient_half = op.forward(op.adjoint(result.z) - x);
    Eigen::VectorXd step = result.z - gradient_half / L;
    for (Eigen::Index i = 0; i < step.size(); ++i) {
      const double v = step[i];
      step[i] = v > threshold ? v - threshold : (v < -threshold ? v + threshold : 0.0);
    }
    if (!mask.empty())
      for (Eigen::Index i = 0; i < step.size(); ++i)
        if (!mask[static_cast<std::size_t>(i)]) step[i] = 0.0;
    result.z = std::move(step);
    const double current = objective(result.z);
    if (!std::isfinite(current)) throw NonFiniteObjective("ista_l1: objective is not finite");
    result.objective_history.push_back(current);
    result.iterations = iter + 1;
    if (prev - current <= config.objective_tol * std::max(prev, 1e-300)) break;
    prev = current;
  }
  return result;
}

/* Support-restricted sparse activation recovery:
 *   1. unconstrained l1-regularized least squares;
 *   2. max pooling with its own switches zeroes locally non-maximum values;
 *   3. the same solve restricted to the surviving support.
 * Regions of the first iterate that are entirely zero stay empty.
 */
inline ModelSparseSignal recover_activation(const StructuredOperator& op,
                                            const Eigen::VectorXd& x,
                                            const LassoConfig& config,
                                            const PoolingLayout& layout) {
  if (layout.grid().size() != op.rows())
    throw DimensionMismatch("recover_activation: layout does not match the operator");
  const IstaResult first = ista_l1(op, x, config);
  auto [pooled, switches] = max_pool(first.z, layout);
  const Eigen::VectorXd z_model = upsample(pooled, switches, layout);
  SupportMask mask(static_cast<std::size_t>(op.rows()), 0);
  for (Eigen::Index i = 0; i < z_model.size(); ++i)
    if (z_model[i] != 0.0) mask[static_cast<std::size_t>(i)] = 1;
  const IstaResult second = ista_l1(op, x, config, mask);
  ModelSparseSignal signal;
  signal.coeffs = second.z;
  signal.support = detail::support_of(signal.coeffs, layout.grid());
  signal.sparsity = static_cast<int>(signal.support.size());
  return signal;
}

}  // namespace convsense
