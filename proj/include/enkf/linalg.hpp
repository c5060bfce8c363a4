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

#ifndef ENKF__LINALG_HPP_
#define ENKF__LINALG_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "enkf/error.hpp"

namespace enkf
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg
{

inline bool all_finite(const Matrix & a) {return a.allFinite();}

inline bool is_symmetric(const Matrix & a, double rel_tol = 1e-12)
{
  if (a.rows() != a.cols()) {
    return false;
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix & sym)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Spectral (operator 2-) norm.
inline double op_norm(const Matrix & a)
{
  if (a.size() == 0) {
    return 0.0;
  }
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

/// Symmetric square root via eigendecomposition. Eigenvalues within 1e-12 of zero
/// are clamped to zero; anything more negative is rejected.
inline Matrix sym_sqrt(const Matrix & sym)
{
  if (!is_symmetric(sym)) {
    throw ConfigError("sym_sqrt: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  Vector ev = es.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-12) {
        throw ConfigError("sym_sqrt: matrix is not positive semidefinite");
      }
      ev(i) = 0.0;
    }
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Solves X * S = B for X with S symmetric positive definite (X = B S^{-1}).
inline Matrix right_solve_spd(const Matrix & b, const Matrix & s)
{
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw RankError("right_solve_spd: matrix is not positive definite");
  }
  return llt.solve(b.transpose()).transpose();
}

inline Matrix spd_inverse(const Matrix & s)
{
  return right_solve_spd(Matrix::Identity(s.rows(), s.cols()), s);
}

}  // namespace linalg
}  // namespace enkf

#endif  // ENKF__LINALG_HPP_
