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
#include <random>

#include "enkf/model.hpp"

namespace
{

using enkf::Ensemble;
using enkf::Matrix;
using enkf::ModelSpec;
using enkf::Vector;

ModelSpec identity_obs_model(enkf::Index d)
{
  const Matrix I = Matrix::Identity(d, d);
  return enkf::linear_model(Matrix::Zero(d, d), I, I, I);
}

Ensemble row(std::initializer_list<double> v)
{
  Matrix X(1, static_cast<enkf::Index>(v.size()));
  enkf::Index i = 0;
  for (double x : v) {
    X(0, i++) = x;
  }
  return Ensemble(X);
}

TEST(ComputeStats, TwoMembers)
{
  const auto s = enkf::compute_stats(row({1.0, 3.0}), identity_obs_model(1));
  EXPECT_DOUBLE_EQ(s.mean(0), 2.0);
  EXPECT_DOUBLE_EQ(s.anomalies(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.anomalies(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s.covariance(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(s.spread, 2.0);
}

TEST(ComputeStats, IdenticalMembersAreDegenerate)
{
  Matrix X = Matrix::Constant(2, 5, 0.7);
  const auto s = enkf::compute_stats(Ensemble(X), identity_obs_model(2));
  EXPECT_TRUE(s.anomalies.isZero(0.0));
  EXPECT_TRUE(s.obs_anomalies.isZero(0.0));
  EXPECT_TRUE(s.covariance.isZero(0.0));
  EXPECT_EQ(s.spread, 0.0);
}

TEST(ComputeStats, ThreeMembersIdentityObservation)
{
  const auto s = enkf::compute_stats(row({0.0, 1.0, 2.0}), identity_obs_model(1));
  EXPECT_DOUBLE_EQ(s.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(s.covariance(0, 0), 1.0);
  // sum of squared anomalies is 2, over M-1 = 2; in one dimension V = trace(P) = P
  EXPECT_DOUBLE_EQ(s.spread, 1.0);
  EXPECT_TRUE(s.obs_anomalies.isApprox(s.anomalies));
  EXPECT_DOUBLE_EQ(s.anomalies(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.anomalies(0, 1), 0.0);
}

TEST(ComputeStats, DimensionMismatchIsConfigError)
{
  EXPECT_THROW(enkf::compute_stats(row({1.0, 2.0}), identity_obs_model(2)), enkf::ConfigError);
}

TEST(ComputeStats, InvariantsOnRandomEnsembles)
{
  const auto model = enkf::sin_tanh_model(3, 0.5, 2.0, Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix X(3, 7);
    for (enkf::Index i = 0; i < X.size(); ++i) {
      X(i) = 3.0 * n01(gen);
    }
    const auto s = enkf::compute_stats(Ensemble(X), model);
    const double scale = X.cwiseAbs().maxCoeff();
    EXPECT_LE(s.anomalies.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LE(s.obs_anomalies.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12 * scale);
    // trace identity: same anomalies, same number
    EXPECT_EQ(s.spread, s.covariance.trace());
    EXPECT_NEAR(s.spread, s.anomalies.squaredNorm() / 6.0, 1e-12 * s.spread);
    EXPECT_GE(enkf::linalg::min_eigenvalue(s.covariance), -1e-12);
    for (enkf::Index i = 0; i < 7; ++i) {
      EXPECT_TRUE(s.obs_values.col(i).isApprox(model.g(X.col(i))));
    }
    // sum_i <X_i - x bar, c> = 0 with c = f(x bar) - f bar
    const Matrix F = enkf::apply_columns(model.drift, X, 3);
    const Vector c = model.f(s.mean) - F.rowwise().mean();
    EXPECT_NEAR((s.anomalies.transpose() * c).sum(), 0.0, 1e-12 * scale * (1.0 + c.norm()));

    // translation equivariance
    const Vector v = Vector::LinSpaced(3, -2.0, 5.0);
    const auto t = enkf::compute_stats(Ensemble(X.colwise() + v), model);
    EXPECT_TRUE(t.mean.isApprox(s.mean + v, 1e-12));
    EXPECT_LE((t.anomalies - s.anomalies).cwiseAbs().maxCoeff(), 1e-12 * (scale + 5.0));
    EXPECT_NEAR(t.spread, s.spread, 1e-11 * (1.0 + s.spread));
  }
}

TEST(Ensemble, RejectsSingleMemberAndNonFinite)
{
  EXPECT_THROW(Ensemble(Matrix::Zero(2, 1)), enkf::ConfigError);
  Matrix X = Matrix::Zero(2, 3);
  X(1, 2) = std::nan("");
  EXPECT_THROW(Ensemble{X}, enkf::ConfigError);
}

TEST(GridMaps, Origin)
{
  const enkf::GridSpec g{1.0, 10, 0};
  const auto p = enkf::grid_maps(0.0, g);
  EXPECT_EQ(p.eta, 0.0);
  EXPECT_EQ(p.nu, 0);
  EXPECT_EQ(p.nu_plus, 1);
}

TEST(GridMaps, InteriorPoint)
{
  const enkf::GridSpec g{1.0, 10, 0};
  const auto p = enkf::grid_maps(0.25, g);
  EXPECT_NEAR(p.eta, 0.2, 1e-15);
  EXPECT_NEAR(p.eta_plus, 0.3, 1e-15);
  EXPECT_EQ(p.nu, 2);
  EXPECT_EQ(p.nu_plus, 3);
}

TEST(GridMaps, HorizonAndGridPoints)
{
  const enkf::GridSpec g{2.0, 16, 0};
  const auto end = enkf::grid_maps(2.0, g);
  EXPECT_EQ(end.eta, 2.0);
  EXPECT_EQ(end.nu, 16);
  EXPECT_EQ(end.nu_plus, 16);
  for (int k = 0; k <= 16; ++k) {
    const auto p = enkf::grid_maps(k * g.h(), g);
    EXPECT_EQ(p.nu, k);
    EXPECT_EQ(p.eta, k * g.h());
  }
}

TEST(GridMaps, OutsideHorizonIsRangeError)
{
  const enkf::GridSpec g{1.0, 4, 0};
  EXPECT_THROW(enkf::grid_maps(-1e-9, g), enkf::RangeError);
  EXPECT_THROW(enkf::grid_maps(1.0 + 1e-9, g), enkf::RangeError);
}

TEST(GridSpec, LevelsAndValidation)
{
  const enkf::GridSpec g{1.0, 16, 8};
  EXPECT_EQ(g.steps(0), 16);
  EXPECT_EQ(g.fine_steps(), 4096);
  EXPECT_EQ(g.h(5), std::ldexp(1.0, -9));
  EXPECT_EQ(g.fine_h(), std::ldexp(1.0, -12));
  EXPECT_NO_THROW(g.validate());
  EXPECT_THROW((enkf::GridSpec{0.0, 4, 0}.validate()), enkf::ConfigError);
  EXPECT_THROW((enkf::GridSpec{1.0, 0, 0}.validate()), enkf::ConfigError);
  EXPECT_THROW((enkf::GridSpec{1.0, 4, -1}.validate()), enkf::ConfigError);
}

TEST(SinTanh, DeclaredConstantsHoldOnSamples)
{
  const auto m = enkf::sin_tanh_model(2, 0.1, 0.1, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  EXPECT_TRUE(m.bounded_obs());
  EXPECT_DOUBLE_EQ(m.sup_g, 0.1 * std::sqrt(2.0));
  const auto check = enkf::check_declared_constants(m);
  EXPECT_TRUE(check.passed()) << check.lip_f_ratio << ' ' << check.lip_g_ratio << ' ' <<
    check.one_sided_ratio << ' ' << check.sup_g_ratio;
}

TEST(SinTanh, UnderstatedConstantIsDetected)
{
  auto m = enkf::sin_tanh_model(2, 1.0, 1.0, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  m.lip_f = 0.5;
  EXPECT_FALSE(enkf::check_declared_constants(m).passed());
}

TEST(LinearModel, UnboundedObservationAndOneSidedConstant)
{
  Matrix A(2, 2);
  A << -1.0, 3.0, -3.0, 0.5;
  const auto m = enkf::linear_model(A, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
      2.0 * Matrix::Identity(2, 2));
  EXPECT_FALSE(m.bounded_obs());
  EXPECT_TRUE(m.is_linear());
  EXPECT_DOUBLE_EQ(m.one_sided_f, 0.5);  // skew part drops out
  EXPECT_TRUE(enkf::check_declared_constants(m).passed());
  EXPECT_TRUE(m.C_inv.isApprox(0.5 * Matrix::Identity(2, 2)));
}

TEST(ModelSpec, RejectsNonSpdCovariances)
{
  Matrix Q(2, 2);
  Q << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(enkf::sin_tanh_model(2, 1.0, 1.0, Q, Matrix::Identity(2, 2)), enkf::ConfigError);
  Matrix asym(2, 2);
  asym << 1.0, 0.1, 0.0, 1.0;
  EXPECT_THROW(enkf::sin_tanh_model(2, 1.0, 1.0, Matrix::Identity(2, 2), asym), enkf::ConfigError);
  EXPECT_THROW(
    enkf::sin_tanh_model(2, 1.0, 1.0, Matrix::Identity(3, 3), Matrix::Identity(2, 2)),
    enkf::ConfigError);
}

TEST(Registry, BuiltinsAndUnknownId)
{
  const auto reg = enkf::ModelRegistry::builtin();
  EXPECT_TRUE(reg.contains("sin-tanh"));
  EXPECT_TRUE(reg.contains("linear"));
  enkf::ModelConfig cfg;
  const auto m = reg.make(cfg);
  EXPECT_EQ(m.id, "sin-tanh");
  EXPECT_EQ(m.dim_state, 2);
  cfg.id = "lorenz96";
  EXPECT_THROW(reg.make(cfg), enkf::ConfigError);
  cfg.id = "linear";
  cfg.dim = 0;
  EXPECT_THROW(reg.make(cfg), enkf::ConfigError);
}

}  // namespace
