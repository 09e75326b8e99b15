#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convsense/errors.hpp"
#include "convsense/rng.hpp"

namespace convsense {

/* A bank of K filters over M input channels.
 *
 * Weights are stored flat in (filter, channel, tap) order with taps
 * row-major; the same order the MRIPFB1 file format uses. For dims == 2
 * a filter covers filter_len x filter_len taps per channel.
 */
struct FilterBank {
  int dims = 1;          // spatial rank, 1 or 2
  int num_filters = 0;   // K
  int num_channels = 0;  // M
  int filter_len = 0;    // taps per spatial dimension
  Eigen::VectorXd weights;

  int taps_per_channel() const {
    return dims == 1 ? filter_len : filter_len * filter_len;
  }
  int taps_per_filter() const { return num_channels * taps_per_channel(); }
  Eigen::Index weight_count() const {
    return static_cast<Eigen::Index>(num_filters) * taps_per_filter();
  }

  double tap(int filter, int channel, int flat_tap) const {
    return weights[(static_cast<Eigen::Index>(filter) * num_channels + channel) *
                       taps_per_channel() +
                   flat_tap];
  }
  double& tap(int filter, int channel, int flat_tap) {
    return weights[(static_cast<Eigen::Index>(filter) * num_channels + channel) *
                       taps_per_channel() +
                   flat_tap];
  }

  // l2 norm of one filter group across all channels. Shifting copies the
  // same taps, so this is the norm of every row the filter induces.
  double filter_norm(int filter) const {
    const Eigen::Index stride = taps_per_filter();
    return weights.segment(static_cast<Eigen::Index>(filter) * stride, stride).norm();
  }

  void validate() const {
    if (dims != 1 && dims != 2)
      throw InvalidArgument("FilterBank: dims must be 1 or 2");
    if (num_filters < 1 || num_channels < 1 || filter_len < 1)
      throw InvalidArgument("FilterBank: sizes must be positive");
    if (weights.size() != weight_count())
      throw DimensionMismatch("FilterBank: weight buffer size mismatch");
    if (!weights.allFinite())
      throw InvalidArgument("FilterBank: weights must be finite");
  }
};

// Gaussian bank with entries N(0, 1) scaled by 1/sqrt(M * taps), so every
// induced row has unit expected squared norm. Deterministic per seed;
// draws come from stream 0 of the seed.
inline FilterBank random_filter_bank(int num_filters, int num_channels, int filter_len,
                                     int dims, std::uint64_t seed) {
  FilterBank bank;
  bank.dims = dims;
  bank.num_filters = num_filters;
  bank.num_channels = num_channels;
  bank.filter_len = filter_len;
  if (dims != 1 && dims != 2) throw InvalidArgument("random_filter_bank: dims must be 1 or 2");
  if (num_filters < 1 || num_channels < 1 || filter_len < 1)
    throw InvalidArgument("random_filter_bank: sizes must be positive");
  bank.weights.resize(bank.weight_count());
  RngStream stream(seed, 0);
  const double scale =
      1.0 / std::sqrt(static_cast<double>(num_channels) * bank.taps_per_channel());
  for (Eigen::Index i = 0; i < bank.weights.size(); ++i)
    bank.weights[i] = scale * stream.gaussian();
  return bank;
}

// Rescales each filter group to unit norm, which makes every row of the
// induced operator exactly unit length.
inline FilterBank normalize_rows(const FilterBank& bank) {
  bank.validate();
  FilterBank out = bank;
  const Eigen::Index stride = bank.taps_per_filter();
  for (int i = 0; i < bank.num_filters; ++i) {
    const double norm = bank.filter_norm(i);
    if (norm <= 0.0)
      throw ZeroFilter("normalize_rows: filter " + std::to_string(i) + " has zero norm");
    out.weights.segment(static_cast<Eigen::Index>(i) * stride, stride) /= norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// MRIPFB1 binary format: 8 magic bytes, five little-endian u32 fields
// (dims, K, M, filter_len, reserved=0), then K*M*filter_len^dims f64
// weights in (filter, channel, tap row-major) order.

namespace detail {

inline constexpr std::array<char, 8> kFilterBankMagic = {'M', 'R', 'I', 'P',
                                                         'F', 'B', '1', '\0'};

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF),
                         static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

inline std::uint32_t get_u32_le(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void put_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

inline double get_f64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline void save_filter_bank(const FilterBank& bank, const std::string& path) {
  bank.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_filter_bank: cannot open " + path);
  out.write(detail::kFilterBankMagic.data(), detail::kFilterBankMagic.size());
  detail::put_u32_le(out, static_cast<std::uint32_t>(bank.dims));
  detail::put_u32_le(out, static_cast<std::uint32_t>(bank.num_filters));
  detail::put_u32_le(out, static_cast<std::uint32_t>(bank.num_channels));
  detail::put_u32_le(out, static_cast<std::uint32_t>(bank.filter_len));
  detail::put_u32_le(out, 0);
  for (Eigen::Index i = 0; i < bank.weights.size(); ++i)
    detail::put_f64_le(out, bank.weights[i]);
  if (!out) throw IoError("save_filter_bank: write failed for " + path);
}

inline FilterBank load_filter_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_filter_bank: cannot open " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != detail::kFilterBankMagic)
    throw IoError("load_filter_bank: bad magic in " + path);
  FilterBank bank;
  bank.dims = static_cast<int>(detail::get_u32_le(in));
  bank.num_filters = static_cast<int>(detail::get_u32_le(in));
  bank.num_channels = static_cast<int>(detail::get_u32_le(in));
  bank.filter_len = static_cast<int>(detail::get_u32_le(in));
  const std::uint32_t reserved = detail::get_u32_le(in);
  if (!in) throw IoError("load_filter_bank: truncated header in " + path);
  if (reserved != 0) throw IoError("load_filter_bank: reserved field must be zero");
  if (bank.dims != 1 && bank.dims != 2)
    throw IoError("load_filter_bank: dims must be 1 or 2");
  if (bank.num_filters < 1 || bank.num_channels < 1 || bank.filter_len < 1)
    throw IoError("load_filter_bank: sizes must be positive");
  bank.weights.resize(bank.weight_count());
  for (Eigen::Index i = 0; i < bank.weights.size(); ++i)
    bank.weights[i] = detail::get_f64_le(in);
  if (!in) throw IoError("load_filter_bank: truncated weights in " + path);
  char extra;
  if (in.read(&extra, 1)) throw IoError("load_filter_bank: trailing bytes in " + path);
  bank.validate();
  return bank;
}

/* Input geometry of one spatial axis: signal extent D and stride t.
 * A filter of length L slides over (D - L)/t + 1 positions; the division
 * must be exact. For dims == 2 the same extent applies to both axes.
 */
struct InputGeometry {
  int extent = 0;  // D
  int stride = 1;  // t

  int shifts_for(int filter_len) const {
    if (extent < 1 || stride < 1) throw InvalidArgument("InputGeometry: sizes must be positive");
    if (filter_len > extent)
      throw GeometryMismatch("InputGeometry: filter longer than signal");
    if ((extent - filter_len) % stride != 0)
      throw GeometryMismatch("InputGeometry: (D - filter_len) not divisible by stride");
    return (extent - filter_len) / stride + 1;
  }
};

}  // namespace convsense
