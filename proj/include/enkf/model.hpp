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

#ifndef ENKF__MODEL_HPP_
#define ENKF__MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "enkf/error.hpp"
#include "enkf/linalg.hpp"

namespace enkf
{

using VectorMap = std::function<Vector(const Vector &)>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Signal/observation model
///
///   dX = f(X) dt + Q^{1/2} dW,    dY = g(X) dt + C^{1/2} dV
///
/// together with the regularity constants the diagnostics rely on. The constants
/// are declared by whoever builds the model; `check_declared_constants` samples them.
/// Call `finalize()` once all fields are set; it validates and caches square roots.
struct ModelSpec
{
  std::string id;
  Index dim_state = 0;
  Index dim_obs = 0;
  VectorMap drift;
  VectorMap obs_map;
  Matrix Q;
  Matrix C;

  double lip_f = 0.0;
  double lip_g = 0.0;
  double sup_f = kInfinity;
  double sup_g = kInfinity;
  /// (Lf)_+ : sup <f(x)-f(y), x-y> / |x-y|^2, clipped at zero.
  double one_sided_f = 0.0;

  /// Present only for linear models f(x) = A x, g(x) = G x.
  std::optional<Matrix> drift_matrix;
  std::optional<Matrix> obs_matrix;

  // cached by finalize()
  Matrix Q_sqrt;
  Matrix C_sqrt;
  Matrix C_inv;

  bool bounded_obs() const {return std::isfinite(sup_g);}
  bool is_linear() const {return drift_matrix.has_value() && obs_matrix.has_value();}

  Vector f(const Vector & x) const {return drift(x);}
  Vector g(const Vector & x) const {return obs_map(x);}

  void finalize()
  {
    if (dim_state <= 0 || dim_obs <= 0) {
      throw ConfigError("model '" + id + "': dimensions must be positive");
    }
    if (!drift || !obs_map) {
      throw ConfigError("model '" + id + "': drift and observation map are required");
    }
    if (Q.rows() != dim_state || Q.cols() != dim_state) {
      throw ConfigError("model '" + id + "': Q must be d x d");
    }
    if (C.rows() != dim_obs || C.cols() != dim_obs) {
      throw ConfigError("model '" + id + "': C must be p x p");
    }
    if (!linalg::is_symmetric(Q) || linalg::min_eigenvalue(Q) <= 0.0) {
      throw ConfigError("model '" + id + "': Q must be symmetric positive definite");
    }
    if (!linalg::is_symmetric(C) || linalg::min_eigenvalue(C) <= 0.0) {
      throw ConfigError("model '" + id + "': C must be symmetric positive definite");
    }
    if (lip_f < 0.0 || lip_g < 0.0 || sup_f < 0.0 || sup_g < 0.0 || one_sided_f < 0.0) {
      throw ConfigError("model '" + id + "': regularity constants must be nonnegative");
    }
    Q_sqrt = linalg::sym_sqrt(Q);
    C_sqrt = linalg::sym_sqrt(C);
    C_inv = linalg::spd_inverse(C);
  }
};

/// Evaluates a vector map column by column.
inline Matrix apply_columns(const VectorMap & fn, const Matrix & x, Index out_rows)
{
  Matrix out(out_rows, x.cols());
  for (Index i = 0; i < x.cols(); ++i) {
    Vector v = fn(x.col(i));
    if (v.size() != out_rows) {
      throw ConfigError("vector map returned wrong dimension");
    }
    out.col(i) = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in models

/// f(x) = a sin(x), g(x) = b tanh(x) componentwise; d = p. Both maps are bounded
/// and Lipschitz. Sup norms are Euclidean (a sqrt(d), b sqrt(d)).
inline ModelSpec sin_tanh_model(Index dim, double a, double b, const Matrix & Q, const Matrix & C)
{
  ModelSpec m;
  m.id = "sin-tanh";
  m.dim_state = dim;
  m.dim_obs = dim;
  m.drift = [a](const Vector & x) -> Vector {return a * x.array().sin().matrix();};
  m.obs_map = [b](const Vector & x) -> Vector {return b * x.array().tanh().matrix();};
  m.Q = Q;
  m.C = C;
  const double rd = std::sqrt(static_cast<double>(dim));
  m.lip_f = std::abs(a);
  m.lip_g = std::abs(b);
  m.sup_f = std::abs(a) * rd;
  m.sup_g = std::abs(b) * rd;
  m.one_sided_f = std::abs(a);
  m.finalize();
  return m;
}

/// f(x) = a (every component), g(x) = b tanh(x); d = p.
inline ModelSpec constant_drift_model(
  Index dim, double a, double b, const Matrix & Q, const Matrix & C)
{
  ModelSpec m;
  m.id = "constant-drift";
  m.dim_state = dim;
  m.dim_obs = dim;
  m.drift = [a, dim](const Vector &) -> Vector {return Vector::Constant(dim, a);};
  m.obs_map = [b](const Vector & x) -> Vector {return b * x.array().tanh().matrix();};
  m.Q = Q;
  m.C = C;
  const double rd = std::sqrt(static_cast<double>(dim));
  m.lip_f = 0.0;
  m.lip_g = std::abs(b);
  m.sup_f = std::abs(a) * rd;
  m.sup_g = std::abs(b) * rd;
  m.one_sided_f = 0.0;
  m.finalize();
  return m;
}

/// f(x) = A x, g(x) = G x. The observation map is unbounded (sup_g = inf), so
/// diagnostics that need sup_g are unavailable for this model.
inline ModelSpec linear_model(const Matrix & A, const Matrix & G, const Matrix & Q, const Matrix & C)
{
  if (A.rows() != A.cols() || G.cols() != A.rows()) {
    throw ConfigError("linear model: A must be d x d and G p x d");
  }
  ModelSpec m;
  m.id = "linear";
  m.dim_state = A.rows();
  m.dim_obs = G.rows();
  m.drift = [A](const Vector & x) -> Vector {return A * x;};
  m.obs_map = [G](const Vector & x) -> Vector {return G * x;};
  m.Q = Q;
  m.C = C;
  m.lip_f = linalg::op_norm(A);
  m.lip_g = linalg::op_norm(G);
  m.sup_f = A.isZero(0.0) ? 0.0 : kInfinity;
  m.sup_g = G.isZero(0.0) ? 0.0 : kInfinity;
  const Matrix sym = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  m.one_sided_f = std::max(0.0, es.eigenvalues().maxCoeff());
  m.drift_matrix = A;
  m.obs_matrix = G;
  m.finalize();
  return m;
}

/// Flat parameter set used to build a registered model.
struct ModelConfig
{
  std::string id = "sin-tanh";
  Index dim = 2;
  double drift_scale = 0.1;  // a in sin-tanh
  double obs_scale = 0.1;    // b in sin-tanh
  double q = 1.0;            // Q = q I
  double c = 1.0;            // C = c I
  double linear_a = -0.5;    // A = linear_a I
  double linear_g = 1.0;     // G = linear_g I
};

class ModelRegistry
{
public:
  using Factory = std::function<ModelSpec(const ModelConfig &)>;

  void add(const std::string & id, Factory factory) {factories_[id] = std::move(factory);}
  bool contains(const std::string & id) const {return factories_.count(id) != 0;}

  ModelSpec make(const ModelConfig & cfg) const
  {
    auto it = factories_.find(cfg.id);
    if (it == factories_.end()) {
      throw ConfigError("model", "unknown model id '" + cfg.id + "'");
    }
    if (cfg.dim < 1) {
      throw ConfigError("dim", "model dimension must be at least 1");
    }
    for (double v : {cfg.drift_scale, cfg.obs_scale, cfg.q, cfg.c, cfg.linear_a, cfg.linear_g}) {
      if (!std::isfinite(v)) {
        throw ConfigError("model parameters must be finite");
      }
    }
    return it->second(cfg);
  }

  std::vector<std::string> ids() const
  {
    std::vector<std::string> out;
    for (const auto & kv : factories_) {
      out.push_back(kv.first);
    }
    return out;
  }

  /// Registry holding "sin-tanh", "linear" and "constant-drift".
  static ModelRegistry builtin()
  {
    ModelRegistry r;
    r.add(
      "sin-tanh", [](const ModelConfig & c) {
        const Matrix I = Matrix::Identity(c.dim, c.dim);
        return sin_tanh_model(c.dim, c.drift_scale, c.obs_scale, c.q * I, c.c * I);
      });
    r.add(
      "linear", [](const ModelConfig & c) {
        const Matrix I = Matrix::Identity(c.dim, c.dim);
        return linear_model(c.linear_a * I, c.linear_g * I, c.q * I, c.c * I);
      });
    r.add(
      "constant-drift", [](const ModelConfig & c) {
        const Matrix I = Matrix::Identity(c.dim, c.dim);
        return constant_drift_model(c.dim, c.drift_scale, c.obs_scale, c.q * I, c.c * I);
      });
    return r;
  }

private:
  std::map<std::string, Factory> factories_;
};

/// Worst observed ratios of the sampled regularity inequalities to their declared bounds.
/// A ratio <= 1 means the declaration held on every sample.
struct ConstantCheck
{
  double lip_f_ratio = 0.0;
  double lip_g_ratio = 0.0;
  double one_sided_ratio = 0.0;
  double sup_g_ratio = 0.0;
  bool passed(double tol = 1e-12) const
  {
    return lip_f_ratio <= 1.0 + tol && lip_g_ratio <= 1.0 + tol &&
           one_sided_ratio <= 1.0 + tol && sup_g_ratio <= 1.0 + tol;
  }
};

inline ConstantCheck check_declared_constants(
  const ModelSpec & m, std::uint64_t seed = 7, int samples = 2000, double scale = 5.0)
{
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  auto draw = [&]() {
      Vector v(m.dim_state);
      for (Index i = 0; i < v.size(); ++i) {
        v(i) = scale * n01(gen);
      }
      return v;
    };
  ConstantCheck out;
  for (int s = 0; s < samples; ++s) {
    const Vector x = draw();
    const Vector y = draw();
    const Vector dx = x - y;
    const double n2 = dx.squaredNorm();
    if (n2 == 0.0) {
      continue;
    }
    const Vector df = m.f(x) - m.f(y);
    const Vector dg = m.g(x) - m.g(y);
    auto ratio = [](double lhs, double rhs) {
        if (rhs == 0.0) {
          return lhs <= 0.0 ? 0.0 : kInfinity;
        }
        return lhs / rhs;
      };
    out.lip_f_ratio = std::max(out.lip_f_ratio, ratio(df.norm(), m.lip_f * std::sqrt(n2)));
    out.lip_g_ratio = std::max(out.lip_g_ratio, ratio(dg.norm(), m.lip_g * std::sqrt(n2)));
    out.one_sided_ratio = std::max(out.one_sided_ratio, ratio(df.dot(dx), m.one_sided_f * n2));
    if (m.bounded_obs()) {
      out.sup_g_ratio = std::max(out.sup_g_ratio, ratio(m.g(x).norm(), m.sup_g));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Time grids

/// Uniform grid on [0, T] with `coarse_steps` steps at level 0. Level l has
/// coarse_steps * 2^l steps; the finest level is `refinement`.
struct GridSpec
{
  double horizon = 1.0;
  std::int64_t coarse_steps = 1;
  int refinement = 0;

  std::int64_t steps(int level = 0) const {return coarse_steps << level;}
  std::int64_t fine_steps() const {return steps(refinement);}
  double h(int level = 0) const {return horizon / static_cast<double>(steps(level));}
  double fine_h() const {return h(refinement);}

  void validate() const
  {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw ConfigError("horizon", "grid: horizon must be positive and finite");
    }
    if (coarse_steps <= 0) {
      throw ConfigError("coarse_steps", "grid: step count must be positive");
    }
    if (refinement < 0 || refinement > 40) {
      throw ConfigError("refinement", "grid: refinement must lie in [0, 40]");
    }
    if (coarse_steps > (std::int64_t{1} << (50 - refinement))) {
      throw ConfigError("coarse_steps", "grid: fine step count exceeds 2^50");
    }
    for (int l = 0; l <= refinement; ++l) {
      if (h(l) * static_cast<double>(steps(l)) != horizon) {
        throw ConfigError(
          "horizon", "grid: h * L != T in floating point at level " + std::to_string(l));
      }
    }
  }
};

/// eta(t), eta_+(t), nu(t), nu_+(t) on one level of a grid.
struct GridPoint
{
  double eta;
  double eta_plus;
  std::int64_t nu;
  std::int64_t nu_plus;
};

/// Grid maps at time t. Grid points belong to the interval they start:
/// at t = t_k, eta = t_k and nu = k. At t = T both nu and nu_+ equal L.
inline GridPoint grid_maps(double t, const GridSpec & grid, int level = 0)
{
  const double T = grid.horizon;
  if (!(t >= 0.0 && t <= T)) {
    throw RangeError("grid_maps: t outside [0, T]");
  }
  const std::int64_t L = grid.steps(level);
  const double h = grid.h(level);
  auto k = static_cast<std::int64_t>(std::floor(t / h));
  if (k > L) {
    k = L;
  }
  while (k > 0 && static_cast<double>(k) * h > t) {
    --k;
  }
  while (k < L && static_cast<double>(k + 1) * h <= t) {
    ++k;
  }
  const std::int64_t kp = std::min(k + 1, L);
  return {static_cast<double>(k) * h, static_cast<double>(kp) * h, k, kp};
}

// ---------------------------------------------------------------------------
// Ensembles

/// d x M particle block; column i is member i.
class Ensemble
{
public:
  explicit Ensemble(Matrix members)
  : members_(std::move(members))
  {
    if (members_.cols() < 2) {
      throw ConfigError("ensemble needs at least two members");
    }
    if (!members_.allFinite()) {
      throw ConfigError("ensemble has non-finite entries");
    }
  }

  const Matrix & members() const {return members_;}
  Index dim() const {return members_.rows();}
  Index size() const {return members_.cols();}
  Vector member(Index i) const {return members_.col(i);}

private:
  Matrix members_;
};

struct EnsembleStats
{
  Vector mean;            // x bar
  Matrix anomalies;       // E, d x M
  Matrix obs_values;      // g(X^(i)), p x M
  Vector obs_mean;        // g bar
  Matrix obs_anomalies;   // G-script, p x M
  Matrix covariance;      // P = E E^T / (M-1)
  double spread = 0.0;    // V = trace(P)
};

inline EnsembleStats compute_stats(const Ensemble & ens, const ModelSpec & model)
{
  if (ens.dim() != model.dim_state) {
    throw ConfigError("compute_stats: ensemble dimension does not match the model");
  }
  const Matrix & X = ens.members();
  const double m1 = static_cast<double>(ens.size() - 1);
  EnsembleStats s;
  s.mean = X.rowwise().mean();
  s.anomalies = X.colwise() - s.mean;
  s.obs_values = apply_columns(model.obs_map, X, model.dim_obs);
  s.obs_mean = s.obs_values.rowwise().mean();
  s.obs_anomalies = s.obs_values.colwise() - s.obs_mean;
  s.covariance = s.anomalies * s.anomalies.transpose() / m1;
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  s.spread = s.covariance.trace();
  return s;
}

}  // namespace enkf

#endif  // ENKF__MODEL_HPP_
