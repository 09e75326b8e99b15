#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "convsense/errors.hpp"
#include "convsense/model_sparse.hpp"
#include "convsense/recovery.hpp"
#include "convsense/rng.hpp"
#include "convsense/structured_operator.hpp"

/* Diagnostics: how well an operator satisfies the near-isometry theory.
 *
 * empirical_rip samples model-sparse codes and records ||W^T z|| / ||z||;
 * the spread of the squared ratios is a lower bound on the true distortion.
 * exact_model_rip_delta enumerates every model support (or every union of
 * two) and reads the distortion off the extreme eigenvalues of the row
 * Gram submatrices -- exact, but capped by enumeration size.
 *
 * Trials are independent: trial j draws from stream j+1 of the experiment
 * seed, so reports are reproducible bit for bit regardless of schedule.
 */

namespace convsense {

// ---------------------------------------------------------------------------
// Histograms

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::int64_t> counts;
  std::int64_t underflow = 0;
  std::int64_t overflow = 0;
};

// Uniform bins on [lo, hi), left-closed right-open; out-of-range values are
// tallied separately.
inline Histogram histogram(const std::vector<double>& values, int bins, double lo,
                           double hi) {
  if (bins < 1) throw BadRange("histogram: need at least one bin");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw BadRange("histogram: need finite lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double scale = bins / (hi - lo);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v >= hi) {
      ++h.overflow;
    } else {
      const int bin = std::min(bins - 1, static_cast<int>((v - lo) * scale));
      ++h.counts[static_cast<std::size_t>(bin)];
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Empirical model-RIP

struct RipParams {
  int dims = 1;
  int num_filters = 0;   // K
  int block_extent = 0;  // n
  int sparsity = 0;      // k, or -1 for fraction-driven 2-d sampling
  double nonzero_fraction = 0.0;
  std::string pooling = "full";
  int region_extent = 0;
  std::uint64_t seed = 0;
  int trials = 0;
  int resampled = 0;
};

struct RipReport {
  std::vector<double> ratios;  // ||W^T z|| / ||z|| per trial
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
  double delta_hat = 0.0;  // max |ratio^2 - 1|; a lower bound on the true distortion
  RipParams params;
};

namespace detail {

inline void finalize_ratio_stats(RipReport& report) {
  const auto& r = report.ratios;
  const auto count = static_cast<double>(r.size());
  double sum = 0.0;
  report.min = r.front();
  report.max = r.front();
  report.delta_hat = 0.0;
  for (double v : r) {
    sum += v;
    report.min = std::min(report.min, v);
    report.max = std::max(report.max, v);
    report.delta_hat = std::max(report.delta_hat, std::abs(v * v - 1.0));
  }
  report.mean = sum / count;
  double ss = 0.0;
  for (double v : r) ss += (v - report.mean) * (v - report.mean);
  report.stddev = r.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
}

}  // namespace detail

inline RipReport empirical_rip(const StructuredOperator& op, int k, int trials,
                               std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("empirical_rip: trials must be >= 1");
  if (k < 1) throw InvalidArgument("empirical_rip: k must be >= 1");
  const ActivationGrid grid = op.grid();
  if (k > grid.num_blocks) throw SparsityTooLarge("empirical_rip: k exceeds block count");

  RipReport report;
  report.params = {grid.dims, grid.num_blocks, grid.block_extent, k, 0.0,
                   "full",    0,               seed,              trials, 0};
  report.ratios.reserve(static_cast<std::size_t>(trials));
  for (int trial = 0; trial < trials; ++trial) {
    RngStream stream(seed, static_cast<std::uint64_t>(trial) + 1);
    ModelSparseSignal z = sample_model_sparse(grid, k, stream);
    int attempts = 0;
    while (z.coeffs.norm() == 0.0) {
      if (++attempts > 64) throw DegenerateTrial("empirical_rip: cannot draw a nonzero code");
      ++report.params.resampled;
      z = sample_model_sparse(grid, k, stream);
    }
    report.ratios.push_back(op.adjoint_sparse(z).norm() / z.coeffs.norm());
  }
  detail::finalize_ratio_stats(report);
  return report;
}

// ---------------------------------------------------------------------------
// Exact model-RIP by enumeration

// Every support of the block model with exactly k occupied blocks, as sorted
// flat index lists. Blocks are chosen in lexicographic order, positions by
// odometer, so the order is deterministic.
inline std::vector<std::vector<int>> enumerate_model_supports(const ActivationGrid& grid,
                                                              int k) {
  if (k < 0 || k > grid.num_blocks)
    throw SparsityTooLarge("enumerate_model_supports: invalid k");
  std::vector<std::vector<int>> supports;
  const int positions = grid.positions_per_block();
  std::vector<int> blocks(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) blocks[static_cast<std::size_t>(i)] = i;
  if (k == 0) {
    supports.push_back({});
    return supports;
  }
  for (;;) {
    std::vector<int> pos(static_cast<std::size_t>(k), 0);
    for (;;) {
      std::vector<int> support(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i)
        support[static_cast<std::size_t>(i)] =
            blocks[static_cast<std::size_t>(i)] * positions + pos[static_cast<std::size_t>(i)];
      supports.push_back(std::move(support));
      int axis = k - 1;
      while (axis >= 0 && ++pos[static_cast<std::size_t>(axis)] == positions)
        pos[static_cast<std::size_t>(axis--)] = 0;
      if (axis < 0) break;
    }
    int axis = k - 1;
    while (axis >= 0 && blocks[static_cast<std::size_t>(axis)] == grid.num_blocks - k + axis)
      --axis;
    if (axis < 0) break;
    ++blocks[static_cast<std::size_t>(axis)];
    for (int i = axis + 1; i < k; ++i)
      blocks[static_cast<std::size_t>(i)] = blocks[static_cast<std::size_t>(i - 1)] + 1;
  }
  return supports;
}

inline std::uint64_t model_support_count(const ActivationGrid& grid, int k) {
  // C(K, k) * positions^k, saturating at max to trip the cap check.
  const auto saturating_mul = [](std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
      return std::numeric_limits<std::uint64_t>::max();
    return a * b;
  };
  std::uint64_t count = 1;
  for (int i = 0; i < k; ++i) {
    count = saturating_mul(count, static_cast<std::uint64_t>(grid.num_blocks - i));
    count /= static_cast<std::uint64_t>(i) + 1;
    count = saturating_mul(count, static_cast<std::uint64_t>(grid.positions_per_block()));
  }
  return count;
}

namespace detail {

inline void gram_extremes(const Eigen::MatrixXd& row_gram, const std::vector<int>& support,
                          double& delta) {
  const auto size = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd sub(size, size);
  for (Eigen::Index a = 0; a < size; ++a)
    for (Eigen::Index b = 0; b < size; ++b)
      sub(a, b) = row_gram(support[static_cast<std::size_t>(a)],
                           support[static_cast<std::size_t>(b)]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sub,
                                                        Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  delta = std::max({delta, ev(size - 1) - 1.0, 1.0 - ev(0)});
}

}  // namespace detail

/* Exact distortion over the model: order 1 enumerates every k-block
 * support, order 2 every union of two. For each support the extreme
 * eigenvalues of the corresponding row Gram submatrix give the local
 * distortion; the result is the maximum. Throws EnumerationTooLarge when
 * the support (or pair) count exceeds the cap.
 */
inline double exact_model_rip_delta(const StructuredOperator& op, int k, int order,
                                    std::uint64_t enumeration_cap = 1'000'000) {
  if (order != 1 && order != 2) throw InvalidArgument("exact_model_rip_delta: order is 1 or 2");
  if (k < 1) throw InvalidArgument("exact_model_rip_delta: k must be >= 1");
  const ActivationGrid grid = op.grid();
  if (k > grid.num_blocks)
    throw SparsityTooLarge("exact_model_rip_delta: k exceeds block count");

  const std::uint64_t count = model_support_count(grid, k);
  if (count > enumeration_cap)
    throw EnumerationTooLarge("exact_model_rip_delta: enumeration exceeds the cap");
  if (order == 2 && count * (count + 1) / 2 > enumeration_cap)
    throw EnumerationTooLarge("exact_model_rip_delta: pair enumeration exceeds the cap");

  const Eigen::MatrixXd W = op.dense();
  const Eigen::MatrixXd row_gram = W * W.transpose();
  const auto supports = enumerate_model_supports(grid, k);

  double delta = 0.0;
  if (order == 1) {
    for (const auto& support : supports) detail::gram_extremes(row_gram, support, delta);
    return delta;
  }
  std::vector<int> merged;
  for (std::size_t a = 0; a < supports.size(); ++a)
    for (std::size_t b = a; b < supports.size(); ++b) {
      merged.clear();
      std::set_union(supports[a].begin(), supports[a].end(), supports[b].begin(),
                     supports[b].end(), std::back_inserter(merged));
      detail::gram_extremes(row_gram, merged, delta);
    }
  return delta;
}

// ---------------------------------------------------------------------------
// Theorem-style checks

struct SampleComplexityCheck {
  bool holds = false;
  double lhs = 0.0;  // M * l^2 / D
  double rhs = 0.0;  // (C / delta^2) * (k (ln K + ln n) - ln eps)
};

// Natural logarithms; the caller-supplied constant absorbs base changes.
inline SampleComplexityCheck theorem1_predicate(int num_channels, int filter_len,
                                                int extent, int k, int num_filters,
                                                int shifts, double delta, double eps,
                                                double constant) {
  if (num_channels < 1 || filter_len < 1 || extent < 1 || k < 1 || num_filters < 1 ||
      shifts < 1)
    throw InvalidArgument("theorem1_predicate: sizes must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("theorem1_predicate: delta in (0,1)");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("theorem1_predicate: eps in (0,1)");
  if (!(constant > 0.0)) throw InvalidArgument("theorem1_predicate: constant must be positive");
  SampleComplexityCheck check;
  check.lhs = static_cast<double>(num_channels) * filter_len * filter_len / extent;
  check.rhs = constant / (delta * delta) *
              (k * (std::log(static_cast<double>(num_filters)) +
                    std::log(static_cast<double>(shifts))) -
               std::log(eps));
  check.holds = check.lhs >= check.rhs;
  return check;
}

inline double theorem2_bound(double delta_k, double delta_2k) {
  if (!(delta_k >= 0.0 && delta_k <= delta_2k && delta_2k < 1.0))
    throw DeltaOutOfRange("theorem2_bound: need 0 <= delta_k <= delta_2k < 1");
  return 5.0 * delta_2k / (1.0 - delta_k) * std::sqrt((1.0 + delta_2k) / (1.0 - delta_2k));
}

// ---------------------------------------------------------------------------
// Reconstruction experiment (the 1-d histogram triple)

struct ReconstructionReport {
  // Per trial, in draw order (streams shared with empirical_rip at the same
  // seed, so ratios here match that report bitwise):
  std::vector<double> rip_ratios;       // ||W^T z|| / ||z||
  std::vector<double> code_ratios;      // ||W_S W_S^T z|| / ||z||, S = supp(z)
  std::vector<double> errors;           // ||x_hat - x|| / ||x||
  std::vector<double> errors_matched;   // same, after matching ||x_hat|| to ||x||
  int resampled = 0;
};

/* Per trial: draw z in the model, synthesize x = W^T z, reconstruct
 * x_hat = W^T M(W x, k) with the requested upsampling, and record the
 * relative error. errors_matched rescales x_hat to the norm of x first,
 * the convention used when reconstructed activations are consumed
 * downstream. code_ratios is the support-restricted reconstructed-code
 * ratio, the near-isometry corollary companion.
 */
inline ReconstructionReport reconstruction_experiment(const StructuredOperator& op, int k,
                                                      const PoolingLayout& layout,
                                                      Upsampling upsampling, int trials,
                                                      std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("reconstruction_experiment: trials must be >= 1");
  const ActivationGrid grid = op.grid();
  if (k < 1) throw InvalidArgument("reconstruction_experiment: k must be >= 1");
  if (k > grid.num_blocks)
    throw SparsityTooLarge("reconstruction_experiment: k exceeds block count");
  ReconstructionReport report;
  for (int trial = 0; trial < trials; ++trial) {
    RngStream stream(seed, static_cast<std::uint64_t>(trial) + 1);
    ModelSparseSignal z = sample_model_sparse(grid, k, stream);
    int attempts = 0;
    while (z.coeffs.norm() == 0.0) {
      if (++attempts > 64)
        throw DegenerateTrial("reconstruction_experiment: cannot draw a nonzero code");
      ++report.resampled;
      z = sample_model_sparse(grid, k, stream);
    }
    const double z_norm = z.coeffs.norm();
    const Eigen::VectorXd x = op.adjoint_sparse(z);
    const double x_norm = x.norm();
    report.rip_ratios.push_back(x_norm / z_norm);

    const Eigen::VectorXd h = op.forward(x);
    double restricted = 0.0;
    const int positions = grid.positions_per_block();
    for (const auto& [block, position] : z.support) {
      const double v = h[static_cast<Eigen::Index>(block) * positions + position];
      restricted += v * v;
    }
    report.code_ratios.push_back(std::sqrt(restricted) / z_norm);

    const FeedforwardResult rec = feedforward_reconstruct(op, x, k, layout, upsampling);
    const double err = (rec.x_hat - x).norm() / x_norm;
    report.errors.push_back(err);
    const double rec_norm = rec.x_hat.norm();
    if (rec_norm > 0.0) {
      report.errors_matched.push_back((rec.x_hat * (x_norm / rec_norm) - x).norm() / x_norm);
    } else {
      report.errors_matched.push_back(1.0);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// 2-d region-sparse experiment

/* Samples 2-d codes with at most one nonzero per pooling region: each
 * (filter, region) cell is occupied independently with probability
 * nonzero_fraction, the position is uniform within the region, values are
 * uniform on [-1, 1). All-zero draws are resampled (counted in the report).
 */
inline RipReport rip_2d_experiment(const StructuredOperator& op, const PoolingLayout& layout,
                                   double nonzero_fraction, int trials, std::uint64_t seed) {
  if (op.dims() != 2) throw InvalidArgument("rip_2d_experiment: operator must be 2-d");
  if (layout.grid().size() != op.rows())
    throw DimensionMismatch("rip_2d_experiment: layout does not match the operator");
  if (!(nonzero_fraction > 0.0 && nonzero_fraction <= 1.0))
    throw BadRange("rip_2d_experiment: nonzero fraction must be in (0, 1]");
  if (trials < 1) throw InvalidArgument("rip_2d_experiment: trials must be >= 1");

  const ActivationGrid grid = op.grid();
  RipReport report;
  report.params = {grid.dims,
                   grid.num_blocks,
                   grid.block_extent,
                   -1,
                   nonzero_fraction,
                   layout.geometry().mode == PoolingGeometry::Mode::kRegions ? "regions" : "full",
                   layout.geometry().mode == PoolingGeometry::Mode::kRegions
                       ? layout.geometry().region_extent
                       : grid.block_extent,
                   seed,
                   trials,
                   0};
  report.ratios.reserve(static_cast<std::size_t>(trials));

  const int positions = grid.positions_per_block();
  for (int trial = 0; trial < trials; ++trial) {
    RngStream stream(seed, static_cast<std::uint64_t>(trial) + 1);
    ModelSparseSignal z;
    z.coeffs = Eigen::VectorXd::Zero(grid.size());
    int attempts = 0;
    for (;;) {
      z.coeffs.setZero();
      z.support.clear();
      for (Eigen::Index region = 0; region < layout.region_count(); ++region) {
        if (stream.uniform01() >= nonzero_fraction) continue;
        const int within = static_cast<int>(stream.below(layout.region_size()));
        const Eigen::Index flat = layout.flat_index(region, within);
        z.coeffs[flat] = stream.symmetric_uniform();
      }
      if (z.coeffs.norm() > 0.0) break;
      if (++attempts > 64) throw DegenerateTrial("rip_2d_experiment: cannot draw a nonzero code");
      ++report.params.resampled;
    }
    z.support = detail::support_of(z.coeffs, grid);
    z.sparsity = static_cast<int>(z.support.size());
    report.ratios.push_back(op.adjoint_sparse(z).norm() / z.coeffs.norm());
  }
  detail::finalize_ratio_stats(report);
  return report;
}

}  // namespace convsense
