#pragma once

// Shared fixtures and independent oracles for the test suite. Oracles here
// never call the code paths they check: projections are scored against
// exhaustive support enumeration, operators against explicitly materialized
// matrices, and the lasso solver against coordinate descent.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include <convsense/convsense.hpp>

namespace test_support {

using namespace convsense;

inline Eigen::VectorXd random_vector(Eigen::Index size, RngStream& stream) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = stream.gaussian();
  return v;
}

inline StructuredOperator make_operator(int dims, int K, int M, int L, int D, int t,
                                        std::uint64_t seed, bool normalized) {
  FilterBank bank = random_filter_bank(K, M, L, dims, seed);
  if (normalized) bank = normalize_rows(bank);
  return StructuredOperator(std::move(bank), InputGeometry{D, t});
}

// A D x D orthogonal matrix wrapped as a bank of D full-length filters
// (one shift each), so the operator equals the matrix itself.
inline StructuredOperator orthogonal_operator(int D, std::uint64_t seed) {
  RngStream stream(seed, 0);
  Eigen::MatrixXd G(D, D);
  for (Eigen::Index r = 0; r < D; ++r)
    for (Eigen::Index c = 0; c < D; ++c) G(r, c) = stream.gaussian();
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  FilterBank bank;
  bank.dims = 1;
  bank.num_filters = D;
  bank.num_channels = 1;
  bank.filter_len = D;
  bank.weights.resize(static_cast<Eigen::Index>(D) * D);
  for (int i = 0; i < D; ++i)
    for (int p = 0; p < D; ++p) bank.tap(i, 0, p) = Q(i, p);
  return StructuredOperator(std::move(bank), InputGeometry{D, 1});
}

// The 1x1 single-weight bank whose operator is the D x D identity.
inline StructuredOperator identity_operator(int D) {
  FilterBank bank;
  bank.dims = 1;
  bank.num_filters = 1;
  bank.num_channels = 1;
  bank.filter_len = 1;
  bank.weights = Eigen::VectorXd::Ones(1);
  return StructuredOperator(std::move(bank), InputGeometry{D, 1});
}

// Exhaustive projection oracle: the smallest achievable ||h - z|| over every
// support with exactly k occupied blocks (z = h restricted to the support).
inline double best_model_fit_error(const Eigen::VectorXd& h, const ActivationGrid& grid,
                                   int k) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& support : enumerate_model_supports(grid, k)) {
    double captured = 0.0;
    for (int flat : support) captured += h[flat] * h[flat];
    best = std::min(best, std::sqrt(std::max(0.0, h.squaredNorm() - captured)));
  }
  return best;
}

// Coordinate-descent lasso oracle on the dense matrix: minimizes
// ||x - A z||^2 + lambda ||z||_1 with A = W^T.
inline double coordinate_descent_objective(const Eigen::MatrixXd& A,
                                           const Eigen::VectorXd& x, double lambda,
                                           int sweeps) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(A.cols());
  Eigen::VectorXd residual = x;
  const Eigen::VectorXd col_norms = A.colwise().squaredNorm();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (col_norms[j] == 0.0) continue;
      const double rho = A.col(j).dot(residual) + col_norms[j] * z[j];
      const double soft = std::abs(rho) > lambda / 2.0
                              ? (rho > 0 ? rho - lambda / 2.0 : rho + lambda / 2.0)
                              : 0.0;
      const double updated = soft / col_norms[j];
      if (updated != z[j]) {
        residual += A.col(j) * (z[j] - updated);
        z[j] = updated;
      }
    }
  }
  return (x - A * z).squaredNorm() + lambda * z.lpNorm<1>();
}

inline double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace test_support
