#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "convsense/errors.hpp"
#include "convsense/rng.hpp"

/* The block-structured sparsity model and its pooling realization.
 *
 * An activation vector is partitioned into num_blocks blocks, one per
 * filter, each covering block_extent (1-d) or block_extent^2 (2-d) shift
 * positions. A signal is model-k-sparse when every block holds at most one
 * nonzero and at most k blocks are occupied. Pooling regions refine this:
 * either one region per block (FullBlock) or non-overlapping tiles of
 * region_extent positions per side (Regions), with at most one nonzero per
 * region.
 *
 * max_pool + upsample realize the l2-optimal projection onto the model:
 * per region keep the entry of largest magnitude (sign retained, ties to
 * the lowest flat index), optionally cap the number of occupied regions at
 * k, then place the kept values back either at their recorded positions
 * (switches) or at the first position of each region (naive).
 */

namespace convsense {

struct ActivationGrid {
  int dims = 1;
  int num_blocks = 0;    // K
  int block_extent = 0;  // n per spatial dimension

  int positions_per_block() const {
    return dims == 1 ? block_extent : block_extent * block_extent;
  }
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(num_blocks) * positions_per_block();
  }
};

struct PoolingGeometry {
  enum class Mode { kFullBlock, kRegions };

  Mode mode = Mode::kFullBlock;
  int region_extent = 0;  // p per spatial dimension, Regions mode only

  static PoolingGeometry full_block() { return {Mode::kFullBlock, 0}; }
  static PoolingGeometry regions(int extent) { return {Mode::kRegions, extent}; }
};

// Grid + geometry resolved into region indexing. Regions are ordered
// block-major, then row-major within the block; elements within a region
// are row-major as well, so "first position" is the top-left corner.
class PoolingLayout {
 public:
  PoolingLayout(const ActivationGrid& grid, const PoolingGeometry& geom)
      : grid_(grid), geom_(geom) {
    if (grid.dims != 1 && grid.dims != 2)
      throw InvalidArgument("PoolingLayout: dims must be 1 or 2");
    if (grid.num_blocks < 1 || grid.block_extent < 1)
      throw InvalidArgument("PoolingLayout: grid sizes must be positive");
    if (geom.mode == PoolingGeometry::Mode::kRegions) {
      if (geom.region_extent < 1)
        throw InvalidArgument("PoolingLayout: region extent must be positive");
      if (grid.block_extent % geom.region_extent != 0)
        throw GeometryMismatch("PoolingLayout: region extent must divide block extent");
      tiles_per_side_ = grid.block_extent / geom.region_extent;
      region_side_ = geom.region_extent;
    } else {
      tiles_per_side_ = 1;
      region_side_ = grid.block_extent;
    }
  }

  const ActivationGrid& grid() const { return grid_; }
  const PoolingGeometry& geometry() const { return geom_; }

  int regions_per_block() const {
    return grid_.dims == 1 ? tiles_per_side_ : tiles_per_side_ * tiles_per_side_;
  }
  int region_size() const {
    return grid_.dims == 1 ? region_side_ : region_side_ * region_side_;
  }
  Eigen::Index region_count() const {
    return static_cast<Eigen::Index>(grid_.num_blocks) * regions_per_block();
  }

  // Flat index into the activation vector of element `within` of `region`.
  Eigen::Index flat_index(Eigen::Index region, int within) const {
    const int block = static_cast<int>(region / regions_per_block());
    const int local = static_cast<int>(region % regions_per_block());
    const Eigen::Index base =
        static_cast<Eigen::Index>(block) * grid_.positions_per_block();
    if (grid_.dims == 1) return base + local * region_side_ + within;
    const int tile_row = local / tiles_per_side_;
    const int tile_col = local % tiles_per_side_;
    const int row = tile_row * region_side_ + within / region_side_;
    const int col = tile_col * region_side_ + within % region_side_;
    return base + static_cast<Eigen::Index>(row) * grid_.block_extent + col;
  }

 private:
  ActivationGrid grid_;
  PoolingGeometry geom_;
  int tiles_per_side_ = 1;
  int region_side_ = 1;
};

// Per-region position of the retained value. Regions that are entirely
// zero keep switch 0 and pooled value 0.
using Switches = std::vector<int>;

enum class Upsampling { kSwitches, kNaive };

struct ModelSparseSignal {
  Eigen::VectorXd coeffs;
  // (block index, within-block flat position) of every nonzero, block-sorted.
  std::vector<std::pair<int, int>> support;
  int sparsity = 0;  // the k bound the signal was built under
};

namespace detail {

inline std::vector<std::pair<int, int>> support_of(const Eigen::VectorXd& z,
                                                   const ActivationGrid& grid) {
  std::vector<std::pair<int, int>> support;
  const int positions = grid.positions_per_block();
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] != 0.0)
      support.emplace_back(static_cast<int>(i / positions), static_cast<int>(i % positions));
  return support;
}

}  // namespace detail

// k distinct blocks chosen uniformly, one position uniform within each,
// values i.i.d. uniform on [-1, 1).
inline ModelSparseSignal sample_model_sparse(const ActivationGrid& grid, int k,
                                             RngStream& stream) {
  if (k < 0) throw InvalidArgument("sample_model_sparse: k must be nonnegative");
  if (k > grid.num_blocks)
    throw SparsityTooLarge("sample_model_sparse: k exceeds the number of blocks");
  ModelSparseSignal signal;
  signal.sparsity = k;
  signal.coeffs = Eigen::VectorXd::Zero(grid.size());
  std::vector<int> blocks(grid.num_blocks);
  for (int i = 0; i < grid.num_blocks; ++i) blocks[i] = i;
  const int positions = grid.positions_per_block();
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(stream.below(grid.num_blocks - i));
    std::swap(blocks[i], blocks[j]);
    const int position = static_cast<int>(stream.below(positions));
    signal.coeffs[static_cast<Eigen::Index>(blocks[i]) * positions + position] =
        stream.symmetric_uniform();
  }
  signal.support = detail::support_of(signal.coeffs, grid);
  return signal;
}

// Per-region signed max-abs value plus the position it came from.
inline std::pair<Eigen::VectorXd, Switches> max_pool(const Eigen::VectorXd& h,
                                                     const PoolingLayout& layout) {
  if (h.size() != layout.grid().size())
    throw DimensionMismatch("max_pool: input length does not match the grid");
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(layout.region_count());
  Switches switches(static_cast<std::size_t>(layout.region_count()), 0);
  for (Eigen::Index r = 0; r < layout.region_count(); ++r) {
    double best = 0.0;
    int best_within = 0;
    for (int w = 0; w < layout.region_size(); ++w) {
      const double value = h[layout.flat_index(r, w)];
      if (std::abs(value) > std::abs(best)) {  // strict: ties keep the lowest index
        best = value;
        best_within = w;
      }
    }
    pooled[r] = best;
    switches[static_cast<std::size_t>(r)] = best_within;
  }
  return {std::move(pooled), std::move(switches)};
}

inline Eigen::VectorXd upsample(const Eigen::VectorXd& pooled, const Switches& switches,
                                const PoolingLayout& layout) {
  if (pooled.size() != layout.region_count())
    throw DimensionMismatch("upsample: pooled length does not match the region count");
  if (static_cast<Eigen::Index>(switches.size()) != layout.region_count())
    throw SwitchOutOfRange("upsample: one switch per region required");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(layout.grid().size());
  for (Eigen::Index r = 0; r < layout.region_count(); ++r) {
    const int w = switches[static_cast<std::size_t>(r)];
    if (w < 0 || w >= layout.region_size())
      throw SwitchOutOfRange("upsample: switch outside its region");
    z[layout.flat_index(r, w)] = pooled[r];
  }
  return z;
}

// The naive convention: every pooled value lands on the first (top-left)
// position of its region.
inline Eigen::VectorXd upsample_naive(const Eigen::VectorXd& pooled,
                                      const PoolingLayout& layout) {
  return upsample(pooled, Switches(static_cast<std::size_t>(layout.region_count()), 0),
                  layout);
}

// Zeroes all but the k largest-magnitude entries; ties keep lower indices.
inline void keep_top_k(Eigen::VectorXd& values, int k) {
  if (k < 0) throw InvalidArgument("keep_top_k: k must be nonnegative");
  if (k >= values.size()) return;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  Eigen::VectorXd kept = Eigen::VectorXd::Zero(values.size());
  for (int i = 0; i < k; ++i) kept[order[static_cast<std::size_t>(i)]] = values[order[static_cast<std::size_t>(i)]];
  values.swap(kept);
}

/* l2-optimal projection onto the sparsity model: per-region max-abs
 * selection, then the k regions with the largest retained magnitudes.
 * Pass k >= region_count for per-region selection with no global cap.
 * Returns the projected signal together with the pooling switches.
 */
inline std::pair<ModelSparseSignal, Switches> project_model_sparse(
    const Eigen::VectorXd& h, int k, const PoolingLayout& layout) {
  auto [pooled, switches] = max_pool(h, layout);
  keep_top_k(pooled, k);
  ModelSparseSignal signal;
  signal.coeffs = upsample(pooled, switches, layout);
  signal.support = detail::support_of(signal.coeffs, layout.grid());
  signal.sparsity = k;
  return {std::move(signal), std::move(switches)};
}

// Exact membership test: at most one nonzero per region, at most k
// occupied regions.
inline bool is_model_sparse(const Eigen::VectorXd& z, int k, const PoolingLayout& layout) {
  if (z.size() != layout.grid().size())
    throw DimensionMismatch("is_model_sparse: input length does not match the grid");
  Eigen::Index occupied = 0;
  for (Eigen::Index r = 0; r < layout.region_count(); ++r) {
    int nonzeros = 0;
    for (int w = 0; w < layout.region_size(); ++w)
      if (z[layout.flat_index(r, w)] != 0.0) ++nonzeros;
    if (nonzeros > 1) return false;
    if (nonzeros == 1) ++occupied;
  }
  return occupied <= k;
}

}  // namespace convsense
