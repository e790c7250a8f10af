#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace tensortomo {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Christoffel symbols of the second kind, indexed as gamma[k](i, j) = Γ^k_ij.
using Christoffel = std::array<Mat2, 2>;

enum class ErrorCode {
  NonUnitDirection,
  EscapeFailure,
  NoConvergence,
  CoincidentPoints,
  NonConvergence,
  ZeroField,
  ZeroCovector,
  UnresolvedFrequency,
  FanMismatch,
  GeodesicEntersM,
  IllConditionedPair,
  EnsembleDegenerate,
  CertificationFailure,
  Stagnation,
  ParseError,
  UnknownKey,
  RangeError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Symmetric 2x2 tensor stored as (t11, t12, t22).
inline Mat2 sym_from(double a11, double a12, double a22) {
  Mat2 m;
  m << a11, a12, a12, a22;
  return m;
}

/// Full contraction g^{ik} g^{jl} A_ij B_kl of two covariant 2-tensors.
inline double contract_cov(const Mat2& ginv, const Mat2& a, const Mat2& b) {
  return (ginv * a * ginv).cwiseProduct(b).sum();
}

}  // namespace tensortomo
