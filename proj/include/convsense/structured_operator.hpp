#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "convsense/errors.hpp"
#include "convsense/filter_bank.hpp"
#include "convsense/model_sparse.hpp"

/* The convolution matrix W induced by a filter bank and an input geometry.
 *
 * Row (i, j) of W is filter i shifted by j*stride, concatenated over the M
 * channels; there are n = (D - L)/stride + 1 shifts per spatial dimension.
 * Rows are ordered filter-major (row = i*n + j in 1-d, i*n^2 + jr*n + jc in
 * 2-d), columns channel-major (col = m*D + d, resp. m*D^2 + r*D + c).
 *
 * forward(x)  = W x    -- analysis, the hidden activations
 * adjoint(z)  = W^T z  -- synthesis back into signal space
 *
 * Both are computed by direct (transposed) convolution; dense() materializes
 * W explicitly and is meant for small shapes and cross-checks. Instances are
 * immutable after construction and safe to share across threads.
 */

namespace convsense {

class StructuredOperator {
 public:
  StructuredOperator(FilterBank bank, InputGeometry geometry)
      : bank_(std::move(bank)), geometry_(geometry) {
    bank_.validate();
    shifts_ = geometry_.shifts_for(bank_.filter_len);
  }

  const FilterBank& bank() const { return bank_; }
  const InputGeometry& geometry() const { return geometry_; }
  int dims() const { return bank_.dims; }
  int shifts() const { return shifts_; }

  Eigen::Index rows() const {
    const Eigen::Index per_filter =
        dims() == 1 ? shifts_ : static_cast<Eigen::Index>(shifts_) * shifts_;
    return bank_.num_filters * per_filter;
  }
  Eigen::Index cols() const {
    const Eigen::Index per_channel =
        dims() == 1 ? geometry_.extent
                    : static_cast<Eigen::Index>(geometry_.extent) * geometry_.extent;
    return bank_.num_channels * per_channel;
  }

  ActivationGrid grid() const { return {dims(), bank_.num_filters, shifts_}; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    if (x.size() != cols()) throw DimensionMismatch("forward: input length != col count");
    Eigen::VectorXd h = Eigen::VectorXd::Zero(rows());
    const int K = bank_.num_filters, M = bank_.num_channels, L = bank_.filter_len;
    const int D = geometry_.extent, t = geometry_.stride, n = shifts_;
    if (dims() == 1) {
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int m = 0; m < M; ++m) {
            const Eigen::Index base = static_cast<Eigen::Index>(m) * D + j * t;
            for (int p = 0; p < L; ++p) acc += bank_.tap(i, m, p) * x[base + p];
          }
          h[static_cast<Eigen::Index>(i) * n + j] = acc;
        }
    } else {
      for (int i = 0; i < K; ++i)
        for (int jr = 0; jr < n; ++jr)
          for (int jc = 0; jc < n; ++jc) {
            double acc = 0.0;
            for (int m = 0; m < M; ++m)
              for (int pr = 0; pr < L; ++pr) {
                const Eigen::Index base =
                    (static_cast<Eigen::Index>(m) * D + jr * t + pr) * D + jc * t;
                for (int pc = 0; pc < L; ++pc)
                  acc += bank_.tap(i, m, pr * L + pc) * x[base + pc];
              }
            h[(static_cast<Eigen::Index>(i) * n + jr) * n + jc] = acc;
          }
    }
    return h;
  }

  Eigen::VectorXd adjoint(const Eigen::VectorXd& z) const {
    if (z.size() != rows()) throw DimensionMismatch("adjoint: input length != row count");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols());
    for (Eigen::Index r = 0; r < z.size(); ++r)
      if (z[r] != 0.0) scatter_row(r, z[r], x);
    return x;
  }

  // W^T restricted to an explicit support; identical result and summation
  // order as adjoint() on the scattered vector.
  Eigen::VectorXd adjoint_sparse(const ModelSparseSignal& signal) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols());
    const int positions = grid().positions_per_block();
    for (const auto& [block, position] : signal.support) {
      const Eigen::Index r = static_cast<Eigen::Index>(block) * positions + position;
      if (r < 0 || r >= rows())
        throw DimensionMismatch("adjoint_sparse: support entry outside the grid");
      scatter_row(r, signal.coeffs[r], x);
    }
    return x;
  }

  // Explicit W, built independently of forward()/adjoint() from the row
  // definition; intended for small shapes.
  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(rows(), cols());
    const int K = bank_.num_filters, M = bank_.num_channels, L = bank_.filter_len;
    const int D = geometry_.extent, t = geometry_.stride, n = shifts_;
    if (dims() == 1) {
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < n; ++j)
          for (int m = 0; m < M; ++m)
            for (int p = 0; p < L; ++p)
              W(static_cast<Eigen::Index>(i) * n + j,
                static_cast<Eigen::Index>(m) * D + j * t + p) = bank_.tap(i, m, p);
    } else {
      for (int i = 0; i < K; ++i)
        for (int jr = 0; jr < n; ++jr)
          for (int jc = 0; jc < n; ++jc)
            for (int m = 0; m < M; ++m)
              for (int pr = 0; pr < L; ++pr)
                for (int pc = 0; pc < L; ++pc)
                  W((static_cast<Eigen::Index>(i) * n + jr) * n + jc,
                    (static_cast<Eigen::Index>(m) * D + jr * t + pr) * D + jc * t + pc) =
                      bank_.tap(i, m, pr * L + pc);
    }
    return W;
  }

 private:
  void scatter_row(Eigen::Index row, double value, Eigen::VectorXd& x) const {
    const int M = bank_.num_channels, L = bank_.filter_len;
    const int D = geometry_.extent, t = geometry_.stride, n = shifts_;
    if (dims() == 1) {
      const int i = static_cast<int>(row / n);
      const int j = static_cast<int>(row % n);
      for (int m = 0; m < M; ++m) {
        const Eigen::Index base = static_cast<Eigen::Index>(m) * D + j * t;
        for (int p = 0; p < L; ++p) x[base + p] += value * bank_.tap(i, m, p);
      }
    } else {
      const int i = static_cast<int>(row / (static_cast<Eigen::Index>(n) * n));
      const int rem = static_cast<int>(row % (static_cast<Eigen::Index>(n) * n));
      const int jr = rem / n, jc = rem % n;
      for (int m = 0; m < M; ++m)
        for (int pr = 0; pr < L; ++pr) {
          const Eigen::Index base =
              (static_cast<Eigen::Index>(m) * D + jr * t + pr) * D + jc * t;
          for (int pc = 0; pc < L; ++pc) x[base + pc] += value * bank_.tap(i, m, pr * L + pc);
        }
    }
  }

  FilterBank bank_;
  InputGeometry geometry_;
  int shifts_ = 0;
};

// h split into nonnegative positive and negative parts:
// h = plus - minus, plus .* minus = 0, both >= 0 elementwise.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> crelu_split(const Eigen::VectorXd& h) {
  Eigen::VectorXd plus = h.cwiseMax(0.0);
  Eigen::VectorXd minus = (-h).cwiseMax(0.0);
  return {std::move(plus), std::move(minus)};
}

// W^T (relu(W x) - relu(-W x)) = W^T W x: the paired positive/negative
// filter pipeline. Exact reconstruction when W has orthonormal columns.
inline Eigen::VectorXd crelu_reconstruct(const StructuredOperator& op,
                                         const Eigen::VectorXd& x) {
  const Eigen::VectorXd h = op.forward(x);
  auto [plus, minus] = crelu_split(h);
  return op.adjoint(plus - minus);
}

/* Maximum absolute inner product over distinct rows of W.
 *
 * Two rows overlap only when their shift offsets differ by less than the
 * filter length, and the inner product depends only on the filter pair and
 * the lag. The search therefore runs over filter pairs: one pass over the
 * channels accumulates the cross-correlation at every lag, and the maximum
 * is taken over the lags that correspond to actual row pairs (multiples of
 * the stride, within the shift range). Requires unit-norm rows (1e-9).
 */
inline double coherence(const StructuredOperator& op) {
  const FilterBank& bank = op.bank();
  for (int i = 0; i < bank.num_filters; ++i)
    if (std::abs(bank.filter_norm(i) - 1.0) > 1e-9)
      throw NotNormalized("coherence: rows must have unit norm");

  const int K = bank.num_filters, M = bank.num_channels, L = bank.filter_len;
  const int t = op.geometry().stride, n = op.shifts();
  const int taps = bank.taps_per_channel();
  const double* weights = bank.weights.data();
  const Eigen::Index filter_stride = bank.taps_per_filter();
  const int span = 2 * L - 1;  // lags -(L-1)..L-1 per spatial dimension

  auto lag_reachable = [&](int lag) {
    return lag % t == 0 && std::abs(lag / t) <= n - 1;
  };

  double mu = 0.0;
  std::vector<double> corr(op.dims() == 1 ? span : span * span);
  for (int i1 = 0; i1 < K; ++i1) {
    const double* w1 = weights + i1 * filter_stride;
    for (int i2 = i1; i2 < K; ++i2) {
      const double* w2 = weights + i2 * filter_stride;
      std::fill(corr.begin(), corr.end(), 0.0);
      if (op.dims() == 1) {
        for (int m = 0; m < M; ++m) {
          const double* a = w1 + m * taps;
          const double* b = w2 + m * taps;
          for (int u = 0; u < L; ++u)
            for (int v = 0; v < L; ++v) corr[static_cast<std::size_t>(v - u + L - 1)] += a[u] * b[v];
        }
        for (int lag = -(L - 1); lag <= L - 1; ++lag) {
          if (i1 == i2 && lag <= 0) continue;  // same row at lag 0; +/- symmetric
          if (!lag_reachable(lag)) continue;
          mu = std::max(mu, std::abs(corr[static_cast<std::size_t>(lag + L - 1)]));
        }
      } else {
        for (int m = 0; m < M; ++m) {
          const double* a = w1 + m * taps;
          const double* b = w2 + m * taps;
          for (int u = 0; u < taps; ++u) {
            const int ur = u / L, uc = u % L;
            const double au = a[u];
            double* row = corr.data() + (L - 1 - ur) * span + (L - 1 - uc);
            for (int v = 0; v < taps; ++v) row[(v / L) * span + v % L] += au * b[v];
          }
        }
        for (int lr = -(L - 1); lr <= L - 1; ++lr)
          for (int lc = -(L - 1); lc <= L - 1; ++lc) {
            if (i1 == i2 && (lr < 0 || (lr == 0 && lc <= 0))) continue;  // symmetric half
            if (!lag_reachable(lr) || !lag_reachable(lc)) continue;
            mu = std::max(mu,
                          std::abs(corr[static_cast<std::size_t>((lr + L - 1) * span + lc + L - 1)]));
          }
      }
    }
  }
  return mu;
}

}  // namespace convsense
