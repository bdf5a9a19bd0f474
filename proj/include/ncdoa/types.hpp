// SPDX-License-Identifier: Apache-2.0
//
// Common numeric types and error classes.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ncdoa {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Random engine used everywhere a seeded stream is needed.
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle to (-pi, pi].
inline double wrap_phase(double phi) {
    double w = std::remainder(phi, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

/// Invalid input to an operation (bad index, shape, range).
class ArgumentError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

/// A solver produced NaN/Inf. Carries the outer iteration where it happened.
class NumericFailure : public std::runtime_error {
 public:
    NumericFailure(const std::string& what, int iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

 private:
    int iteration_;
};

/// The requested method cannot run on this array configuration.
class UnsupportedConfiguration : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// File read/write failure; the message includes the path.
class IoError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

}  // namespace ncdoa
