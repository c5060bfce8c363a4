// Copyright 2026 The enkf-limit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENKF__NOISE_HPP_
#define ENKF__NOISE_HPP_

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>

#include "enkf/error.hpp"
#include "enkf/linalg.hpp"
#include "enkf/model.hpp"

namespace enkf
{

// ---------------------------------------------------------------------------
// Counter-based normal variates
//
// Every variate is a pure function of (seed, role, member, component, step), so
// streams can be generated in any order or in parallel and still reproduce bit for bit.

enum class StreamRole : std::uint64_t
{
  kSignal = 1,               // W driving the reference signal
  kObservation = 2,          // V in the observation process
  kEnsembleSignal = 3,       // W^(i) per ensemble member
  kEnsembleObservation = 4,  // V^(i) per ensemble member (perturbed observations)
  kInitial = 5,              // initial ensemble draws
  kReplication = 6,          // per-replication seed derivation
};

namespace detail
{

constexpr std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// uniform in (0, 1]
inline double to_unit(std::uint64_t u)
{
  return (static_cast<double>(u >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

/// Key of one scalar Gaussian stream.
struct StreamKey
{
  std::uint64_t seed;
  StreamRole role;
  std::uint64_t member = 0;
  std::uint64_t component = 0;

  std::uint64_t hash() const
  {
    using detail::splitmix64;
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ static_cast<std::uint64_t>(role));
    k = splitmix64(k ^ (member + 0x632be59bd9b4e019ULL));
    k = splitmix64(k ^ (component + 0x8cb92ba72f3d8dd7ULL));
    return k;
  }
};

/// Standard normal variate number `step` of the stream (Box-Muller on counter-hashed pairs).
inline double normal_at(std::uint64_t stream_hash, std::uint64_t step)
{
  using detail::splitmix64;
  const std::uint64_t pair = step >> 1;
  const std::uint64_t base = splitmix64(stream_hash ^ splitmix64(pair));
  const double u1 = detail::to_unit(splitmix64(base ^ 0x5851f42d4c957f2dULL));
  const double u2 = detail::to_unit(splitmix64(base ^ 0x14057b7ef767814fULL));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return (step & 1U) ? r * std::sin(theta) : r * std::cos(theta);
}

inline double normal_at(const StreamKey & key, std::uint64_t step)
{
  return normal_at(key.hash(), step);
}

/// Seed for replication `rep` derived from a base seed.
inline std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t rep)
{
  return StreamKey{base_seed, StreamRole::kReplication, rep, 0}.hash();
}

// ---------------------------------------------------------------------------
// Lattice

/// Brownian increments for one experiment at the finest resolution.
///
/// Ensemble blocks are stored as (d*M) x N matrices, member-major: rows
/// [i*d, (i+1)*d) belong to member i. Column k viewed as d x M is the block of
/// increments over [t_k, t_{k+1}).
struct NoiseBlocks
{
  Matrix signal;       // d x N
  Matrix observation;  // p x N
  Matrix ens_signal;   // (d*M) x N
  Matrix ens_obs;      // (p*M) x N
};

class NoiseLattice
{
public:
  static constexpr std::uint64_t kDefaultCapBytes = 1ULL << 30;

  static std::uint64_t required_bytes(Index d, Index p, const GridSpec & grid, Index M)
  {
    const auto n = static_cast<std::uint64_t>(grid.fine_steps());
    return static_cast<std::uint64_t>((d + p) * (M + 1)) * n * sizeof(double);
  }

  /// Draws every increment with covariance h_fine * Id.
  static NoiseLattice generate(
    std::uint64_t seed, Index d, Index p, const GridSpec & grid, Index M,
    std::uint64_t cap_bytes = kDefaultCapBytes)
  {
    grid.validate();
    if (d <= 0 || p <= 0) {
      throw ConfigError("noise lattice: dimensions must be positive");
    }
    if (M < 2) {
      throw ConfigError("noise lattice: ensemble size must be at least 2");
    }
    const std::uint64_t need = required_bytes(d, p, grid, M);
    if (need > cap_bytes) {
      throw ResourceError(need, cap_bytes);
    }
    const Index n = grid.fine_steps();
    const double sd = std::sqrt(grid.fine_h());
    auto fill = [&](Matrix & out, Index rows, StreamRole role, Index per_member) {
        out.resize(rows, n);
        for (Index r = 0; r < rows; ++r) {
          const StreamKey key{seed, role,
            static_cast<std::uint64_t>(per_member > 0 ? r / per_member : 0),
            static_cast<std::uint64_t>(per_member > 0 ? r % per_member : r)};
          const std::uint64_t hk = key.hash();
          for (Index k = 0; k < n; ++k) {
            out(r, k) = sd * normal_at(hk, static_cast<std::uint64_t>(k));
          }
        }
      };
    NoiseBlocks b;
    fill(b.signal, d, StreamRole::kSignal, 0);
    fill(b.observation, p, StreamRole::kObservation, 0);
    fill(b.ens_signal, d * M, StreamRole::kEnsembleSignal, d);
    fill(b.ens_obs, p * M, StreamRole::kEnsembleObservation, p);
    return NoiseLattice(grid, seed, d, p, M, std::move(b));
  }

  /// Lattice from explicit increments (forced-noise tests, loading dumps).
  static NoiseLattice from_blocks(
    const GridSpec & grid, std::uint64_t seed, Index d, Index p, Index M, NoiseBlocks blocks)
  {
    grid.validate();
    const Index n = grid.fine_steps();
    auto check = [n](const Matrix & m, Index rows, const char * what) {
        if (m.rows() != rows || m.cols() != n) {
          throw ConfigError(std::string("noise lattice: bad shape for ") + what);
        }
      };
    check(blocks.signal, d, "signal");
    check(blocks.observation, p, "observation");
    check(blocks.ens_signal, d * M, "ensemble signal");
    check(blocks.ens_obs, p * M, "ensemble observation");
    if (M < 2) {
      throw ConfigError("noise lattice: ensemble size must be at least 2");
    }
    return NoiseLattice(grid, seed, d, p, M, std::move(blocks));
  }

  const GridSpec & grid() const {return grid_;}
  std::uint64_t seed() const {return seed_;}
  Index dim_state() const {return d_;}
  Index dim_obs() const {return p_;}
  Index ensemble_size() const {return M_;}
  const NoiseBlocks & blocks() const {return blocks_;}

  // --- binary dump ------------------------------------------------------------
  //
  // Header: 8-byte magic "ENKFLAT1", then u64 seed, d, p, M, coarse_steps,
  // refinement and f64 horizon. Payload: every stream (one row of each block, in
  // the order signal, observation, ens_signal, ens_obs) written contiguously.
  // All values little-endian.

  void dump(const std::string & path) const
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
      throw ConfigError("cannot open '" + path + "' for writing");
    }
    os.write(kMagic, 8);
    write_u64(os, seed_);
    write_u64(os, static_cast<std::uint64_t>(d_));
    write_u64(os, static_cast<std::uint64_t>(p_));
    write_u64(os, static_cast<std::uint64_t>(M_));
    write_u64(os, static_cast<std::uint64_t>(grid_.coarse_steps));
    write_u64(os, static_cast<std::uint64_t>(grid_.refinement));
    write_f64(os, grid_.horizon);
    for (const Matrix * m : {&blocks_.signal, &blocks_.observation, &blocks_.ens_signal,
        &blocks_.ens_obs})
    {
      for (Index r = 0; r < m->rows(); ++r) {
        for (Index k = 0; k < m->cols(); ++k) {
          write_f64(os, (*m)(r, k));
        }
      }
    }
    if (!os) {
      throw ConfigError("write to '" + path + "' failed");
    }
  }

  static NoiseLattice load(const std::string & path)
  {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
      throw ConfigError("cannot open '" + path + "'");
    }
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
      throw ConfigError("'" + path + "' is not a noise lattice dump");
    }
    const std::uint64_t seed = read_u64(is);
    const auto d = static_cast<Index>(read_u64(is));
    const auto p = static_cast<Index>(read_u64(is));
    const auto M = static_cast<Index>(read_u64(is));
    GridSpec grid;
    grid.coarse_steps = static_cast<std::int64_t>(read_u64(is));
    grid.refinement = static_cast<int>(read_u64(is));
    grid.horizon = read_f64(is);
    grid.validate();
    const Index n = grid.fine_steps();
    NoiseBlocks b;
    b.signal.resize(d, n);
    b.observation.resize(p, n);
    b.ens_signal.resize(d * M, n);
    b.ens_obs.resize(p * M, n);
    for (Matrix * m : {&b.signal, &b.observation, &b.ens_signal, &b.ens_obs}) {
      for (Index r = 0; r < m->rows(); ++r) {
        for (Index k = 0; k < m->cols(); ++k) {
          (*m)(r, k) = read_f64(is);
        }
      }
    }
    if (!is) {
      throw ConfigError("'" + path + "' is truncated");
    }
    return from_blocks(grid, seed, d, p, M, std::move(b));
  }

private:
  static constexpr char kMagic[8] = {'E', 'N', 'K', 'F', 'L', 'A', 'T', '1'};

  NoiseLattice(const GridSpec & grid, std::uint64_t seed, Index d, Index p, Index M, NoiseBlocks b)
  : grid_(grid), seed_(seed), d_(d), p_(p), M_(M), blocks_(std::move(b)) {}

  static void write_u64(std::ostream & os, std::uint64_t v)
  {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) {
      buf[i] = static_cast<unsigned char>(v >> (8 * i));
    }
    os.write(reinterpret_cast<const char *>(buf), 8);
  }
  static void write_f64(std::ostream & os, double v) {write_u64(os, std::bit_cast<std::uint64_t>(v));}
  static std::uint64_t read_u64(std::istream & is)
  {
    unsigned char buf[8] = {};
    is.read(reinterpret_cast<char *>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    }
    return v;
  }
  static double read_f64(std::istream & is) {return std::bit_cast<double>(read_u64(is));}

  GridSpec grid_;
  std::uint64_t seed_;
  Index d_;
  Index p_;
  Index M_;
  NoiseBlocks blocks_;
};

// ---------------------------------------------------------------------------
// Coarse views

/// Sums adjacent column pairs `levels` times. Level j is always built from level
/// j-1, so a coarse increment is the tree-ordered sum of its 2^j fine increments
/// and coarsening composes bit for bit.
inline Matrix pairwise_coarsen(const Matrix & fine, int levels)
{
  Matrix cur = fine;
  for (int j = 0; j < levels; ++j) {
    if (cur.cols() % 2 != 0) {
      throw RangeError("pairwise_coarsen: odd number of steps");
    }
    Matrix next(cur.rows(), cur.cols() / 2);
    for (Index k = 0; k < next.cols(); ++k) {
      next.col(k) = cur.col(2 * k) + cur.col(2 * k + 1);
    }
    cur = std::move(next);
  }
  return cur;
}

/// The lattice seen with stepsize h_fine * 2^level.
struct CoarseNoise
{
  int level = 0;             // coarsening exponent j
  std::int64_t factor = 1;   // 2^j
  double h = 0.0;
  Index dim_state = 0;
  Index dim_obs = 0;
  Index ensemble_size = 0;
  NoiseBlocks blocks;

  Index steps() const {return blocks.signal.cols();}

  /// d x M block of ensemble signal increments over [t_k, t_{k+1}).
  Eigen::Map<const Matrix> ens_signal_at(Index k) const
  {
    return {blocks.ens_signal.col(k).data(), dim_state, ensemble_size};
  }
  /// p x M block of ensemble observation perturbations over [t_k, t_{k+1}).
  Eigen::Map<const Matrix> ens_obs_at(Index k) const
  {
    return {blocks.ens_obs.col(k).data(), dim_obs, ensemble_size};
  }
};

inline CoarseNoise coarsen(const NoiseLattice & lattice, int j)
{
  const GridSpec & g = lattice.grid();
  if (j < 0 || j > g.refinement) {
    throw RangeError(
      "coarsen: level " + std::to_string(j) + " outside [0, " + std::to_string(g.refinement) + "]");
  }
  CoarseNoise c;
  c.level = j;
  c.factor = std::int64_t{1} << j;
  c.h = g.h(g.refinement - j);
  c.dim_state = lattice.dim_state();
  c.dim_obs = lattice.dim_obs();
  c.ensemble_size = lattice.ensemble_size();
  const NoiseBlocks & f = lattice.blocks();
  c.blocks.signal = pairwise_coarsen(f.signal, j);
  c.blocks.observation = pairwise_coarsen(f.observation, j);
  c.blocks.ens_signal = pairwise_coarsen(f.ens_signal, j);
  c.blocks.ens_obs = pairwise_coarsen(f.ens_obs, j);
  return c;
}

// ---------------------------------------------------------------------------

struct CenteredBlock
{
  Matrix centered;   // w~(i) - w bar, zero member mean
  double statistic;  // sum_i |w~(i) - w bar|^2 / (M-1)
};

/// Centers a block of M member increments and returns its spread statistic.
/// For i.i.d. N(0, h Id_d) increments the statistic has mean d * h.
inline CenteredBlock centered_perturbations(const Matrix & block)
{
  if (block.cols() < 2) {
    throw ConfigError("centered_perturbations: need at least two members");
  }
  CenteredBlock out;
  const Vector mean = block.rowwise().mean();
  out.centered = block.colwise() - mean;
  out.statistic = out.centered.squaredNorm() / static_cast<double>(block.cols() - 1);
  return out;
}

}  // namespace enkf

#endif  // ENKF__NOISE_HPP_
