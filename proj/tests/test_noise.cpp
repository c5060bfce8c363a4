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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "enkf/noise.hpp"

namespace
{

using enkf::GridSpec;
using enkf::Matrix;
using enkf::NoiseLattice;

double mean(const Eigen::Ref<const Eigen::RowVectorXd> & v) {return v.mean();}

double variance(const Eigen::Ref<const Eigen::RowVectorXd> & v)
{
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

TEST(NormalStream, PureFunctionOfKeyAndStep)
{
  const enkf::StreamKey key{42, enkf::StreamRole::kSignal, 3, 1};
  EXPECT_EQ(enkf::normal_at(key, 17), enkf::normal_at(key, 17));
  const enkf::StreamKey other{42, enkf::StreamRole::kObservation, 3, 1};
  EXPECT_NE(enkf::normal_at(key, 17), enkf::normal_at(other, 17));
}

TEST(Lattice, SameSeedIsBitIdentical)
{
  const GridSpec g{1.0, 8, 4};
  const auto a = NoiseLattice::generate(9, 2, 1, g, 3);
  const auto b = NoiseLattice::generate(9, 2, 1, g, 3);
  EXPECT_TRUE(a.blocks().signal == b.blocks().signal);
  EXPECT_TRUE(a.blocks().observation == b.blocks().observation);
  EXPECT_TRUE(a.blocks().ens_signal == b.blocks().ens_signal);
  EXPECT_TRUE(a.blocks().ens_obs == b.blocks().ens_obs);
}

TEST(Lattice, ShapesAndMoments)
{
  const GridSpec g{1.0, 64, 8};  // N = 16384
  const auto lat = NoiseLattice::generate(123, 2, 2, g, 3);
  const auto & b = lat.blocks();
  const double hf = g.fine_h();
  const double n = static_cast<double>(g.fine_steps());
  EXPECT_EQ(b.signal.rows(), 2);
  EXPECT_EQ(b.ens_signal.rows(), 6);
  EXPECT_EQ(b.ens_obs.rows(), 6);
  EXPECT_EQ(b.signal.cols(), g.fine_steps());
  for (const Matrix * m : {&b.signal, &b.observation, &b.ens_signal, &b.ens_obs}) {
    for (enkf::Index r = 0; r < m->rows(); ++r) {
      // mean: sd sqrt(h/n); variance: sd h sqrt(2/(n-1))
      EXPECT_LE(std::abs(mean(m->row(r))), 5.0 * std::sqrt(hf / n));
      EXPECT_LE(std::abs(variance(m->row(r)) - hf), 5.0 * hf * std::sqrt(2.0 / (n - 1.0)));
    }
  }
}

TEST(Lattice, NeighbouringSeedsAreUncorrelated)
{
  const GridSpec g{1.0, 64, 8};
  const auto a = NoiseLattice::generate(5, 1, 1, g, 2);
  const auto b = NoiseLattice::generate(6, 1, 1, g, 2);
  const double n = static_cast<double>(g.fine_steps());
  auto corr = [](const Eigen::RowVectorXd & x, const Eigen::RowVectorXd & y) {
      const Eigen::RowVectorXd cx = x.array() - x.mean();
      const Eigen::RowVectorXd cy = y.array() - y.mean();
      return cx.dot(cy) / std::sqrt(cx.squaredNorm() * cy.squaredNorm());
    };
  EXPECT_LT(std::abs(corr(a.blocks().signal.row(0), b.blocks().signal.row(0))), 5.0 / std::sqrt(n));
  EXPECT_LT(
    std::abs(corr(a.blocks().ens_obs.row(1), b.blocks().ens_obs.row(1))), 5.0 / std::sqrt(n));
  // distinct roles of one seed are independent streams as well
  EXPECT_LT(
    std::abs(corr(a.blocks().signal.row(0), a.blocks().observation.row(0))), 5.0 / std::sqrt(n));
}

TEST(Lattice, ResourceCap)
{
  const GridSpec g{1.0, 1024, 10};
  try {
    (void)NoiseLattice::generate(1, 2, 2, g, 10, 1024);
    FAIL() << "expected ResourceError";
  } catch (const enkf::ResourceError & e) {
    EXPECT_EQ(e.required_bytes(), NoiseLattice::required_bytes(2, 2, g, 10));
    EXPECT_EQ(e.cap_bytes(), 1024U);
  }
}

TEST(Lattice, RejectsSingleMember)
{
  EXPECT_THROW(NoiseLattice::generate(1, 1, 1, GridSpec{1.0, 4, 1}, 1), enkf::ConfigError);
}

TEST(Coarsen, ExactPairSums)
{
  Matrix fine(1, 4);
  fine << 0.1, 0.2, -0.05, 0.15;
  const Matrix one = enkf::pairwise_coarsen(fine, 1);
  ASSERT_EQ(one.cols(), 2);
  EXPECT_DOUBLE_EQ(one(0, 0), 0.1 + 0.2);
  EXPECT_DOUBLE_EQ(one(0, 1), -0.05 + 0.15);
  EXPECT_NEAR(one(0, 0), 0.3, 1e-15);
  EXPECT_NEAR(one(0, 1), 0.1, 1e-15);
  const Matrix two = enkf::pairwise_coarsen(fine, 2);
  ASSERT_EQ(two.cols(), 1);
  EXPECT_NEAR(two(0, 0), 0.4, 1e-15);
  EXPECT_TRUE(enkf::pairwise_coarsen(fine, 0) == fine);
}

TEST(Coarsen, LevelsAndRange)
{
  const GridSpec g{1.0, 4, 3};
  const auto lat = NoiseLattice::generate(2, 2, 1, g, 3);
  const auto c0 = enkf::coarsen(lat, 0);
  EXPECT_TRUE(c0.blocks.signal == lat.blocks().signal);
  EXPECT_EQ(c0.h, g.fine_h());
  const auto c2 = enkf::coarsen(lat, 2);
  EXPECT_EQ(c2.steps(), g.fine_steps() / 4);
  EXPECT_EQ(c2.h, g.h(1));
  // composing coarsenings reproduces the direct view bit for bit
  EXPECT_TRUE(enkf::pairwise_coarsen(enkf::coarsen(lat, 1).blocks.ens_signal, 1) ==
    c2.blocks.ens_signal);
  // every coarse increment is the sum of its fine cell
  const Matrix & f = lat.blocks().ens_obs;
  for (enkf::Index k = 0; k < c2.steps(); ++k) {
    const Eigen::VectorXd cell = f.middleCols(4 * k, 4).rowwise().sum();
    EXPECT_LE((cell - c2.blocks.ens_obs.col(k)).cwiseAbs().maxCoeff(), 1e-15);
  }
  // member block view
  const auto blk = c2.ens_signal_at(1);
  EXPECT_EQ(blk.rows(), 2);
  EXPECT_EQ(blk.cols(), 3);
  EXPECT_EQ(blk(1, 2), c2.blocks.ens_signal(2 * 2 + 1, 1));
  EXPECT_THROW(enkf::coarsen(lat, 4), enkf::RangeError);
  EXPECT_THROW(enkf::coarsen(lat, -1), enkf::RangeError);
}

TEST(Lattice, DumpAndLoadRoundTrip)
{
  const GridSpec g{0.5, 4, 3};
  const auto lat = NoiseLattice::generate(77, 2, 3, g, 4);
  const auto path = std::filesystem::temp_directory_path() / "enkf_lattice_roundtrip.bin";
  lat.dump(path.string());
  const auto back = NoiseLattice::load(path.string());
  EXPECT_EQ(back.seed(), 77U);
  EXPECT_EQ(back.dim_state(), 2);
  EXPECT_EQ(back.dim_obs(), 3);
  EXPECT_EQ(back.ensemble_size(), 4);
  EXPECT_EQ(back.grid().horizon, 0.5);
  EXPECT_EQ(back.grid().refinement, 3);
  EXPECT_TRUE(back.blocks().signal == lat.blocks().signal);
  EXPECT_TRUE(back.blocks().ens_obs == lat.blocks().ens_obs);
  // header is 8 magic bytes, six u64 and one f64; payload follows
  const auto size = std::filesystem::file_size(path);
  EXPECT_EQ(size, 8U + 7U * 8U + NoiseLattice::required_bytes(2, 3, g, 4));
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "garbage";
  }
  EXPECT_THROW(NoiseLattice::load(path.string()), enkf::ConfigError);
  std::filesystem::remove(path);
}

TEST(CenteredPerturbations, SymmetricPair)
{
  Matrix blk(1, 2);
  blk << 0.3, -0.3;
  const auto c = enkf::centered_perturbations(blk);
  EXPECT_DOUBLE_EQ(c.centered(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(c.centered(0, 1), -0.3);
  EXPECT_DOUBLE_EQ(c.statistic, 2.0 * 0.3 * 0.3);
}

TEST(CenteredPerturbations, EqualMembers)
{
  const auto c = enkf::centered_perturbations(Matrix::Constant(3, 5, 1.25));
  EXPECT_TRUE(c.centered.isZero(0.0));
  EXPECT_EQ(c.statistic, 0.0);
  EXPECT_THROW(enkf::centered_perturbations(Matrix::Zero(2, 1)), enkf::ConfigError);
}

TEST(CenteredPerturbations, CenteredMemberVariance)
{
  // variance of w~(i) - w bar per component is (M-1)/M h
  const GridSpec g{1.0, 64, 7};  // 8192 blocks
  const enkf::Index M = 4;
  const auto lat = NoiseLattice::generate(31, 1, 1, g, M);
  const auto c = enkf::coarsen(lat, 0);
  const double h = c.h;
  double sum = 0.0;
  double sum2 = 0.0;
  const double n = static_cast<double>(c.steps());
  for (enkf::Index k = 0; k < c.steps(); ++k) {
    const auto cp = enkf::centered_perturbations(Matrix(c.ens_signal_at(k)));
    EXPECT_LE(std::abs(cp.centered.rowwise().sum()(0)), 1e-15);
    sum += cp.centered(0, 0) * cp.centered(0, 0);
    sum2 += std::pow(cp.centered(0, 0), 4);
  }
  const double est = sum / n;
  const double se = std::sqrt((sum2 / n - est * est) / n);
  EXPECT_NEAR(est, (M - 1.0) / M * h, 5.0 * se);
}

}  // namespace
