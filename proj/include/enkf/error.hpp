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

#ifndef ENKF__ERROR_HPP_
#define ENKF__ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace enkf
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions, invalid parameters, malformed configuration.
class ConfigError : public Error
{
public:
  using Error::Error;

  /// Error attributed to one configuration field.
  ConfigError(std::string field, const std::string & what)
  : Error(what), field_(std::move(field)) {}

  const std::string & field() const noexcept {return field_;}

private:
  std::string field_;
};

/// Argument outside its admissible interval (time outside [0,T], level > r, ...).
class RangeError : public Error
{
public:
  using Error::Error;
};

/// Operation requested in a mode the model does not support
/// (e.g. sup-norm dependent diagnostics with an unbounded observation map).
class UnsupportedMode : public Error
{
public:
  using Error::Error;
};

/// A state became non-finite while stepping.
class NumericalDivergence : public Error
{
public:
  NumericalDivergence(const std::string & what, std::int64_t step)
  : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::int64_t step() const noexcept {return step_;}

private:
  std::int64_t step_;
};

/// The ensemble covariance lost rank: its smallest eigenvalue dropped below the floor.
class EnsembleCollapse : public Error
{
public:
  EnsembleCollapse(double lambda_min, double floor, std::int64_t step)
  : Error(
      "ensemble collapse: lambda_min=" + std::to_string(lambda_min) +
      " below floor " + std::to_string(floor) + " (step " + std::to_string(step) + ")"),
    lambda_min_(lambda_min), floor_(floor), step_(step) {}

  double lambda_min() const noexcept {return lambda_min_;}
  double floor() const noexcept {return floor_;}
  std::int64_t step() const noexcept {return step_;}

private:
  double lambda_min_;
  double floor_;
  std::int64_t step_;
};

/// A singular matrix where an inverse is required.
class RankError : public Error
{
public:
  using Error::Error;
};

/// Allocation estimate exceeds the configured memory cap.
class ResourceError : public Error
{
public:
  ResourceError(std::uint64_t required, std::uint64_t cap)
  : Error(
      "noise lattice needs " + std::to_string(required) + " bytes, cap is " +
      std::to_string(cap) + " bytes"),
    required_(required), cap_(cap) {}
  std::uint64_t required_bytes() const noexcept {return required_;}
  std::uint64_t cap_bytes() const noexcept {return cap_;}

private:
  std::uint64_t required_;
  std::uint64_t cap_;
};

/// A convergence metric that is zero or negative and therefore has no logarithm.
class DegenerateMetric : public Error
{
public:
  using Error::Error;
};

}  // namespace enkf

#endif  // ENKF__ERROR_HPP_
