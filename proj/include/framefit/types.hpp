#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

namespace framefit {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Argument types that take no part in template deduction: the scalar type
// comes from the family or geometry, and Eigen expressions convert on call.
template <typename Scalar>
using VectorArg = std::type_identity_t<Vector<Scalar>>;
template <typename Scalar>
using ScalarArg = std::type_identity_t<Scalar>;

enum class ErrorCode {
  RankDeficient,
  DimensionMismatch,
  MissingSecondOrder,
  InvalidStep,
  EmptyDomain,
  LeftDomain,
  SingularHessian,
  NearSingular,
  AllCandidatesFailed,
  ParseError,
  ValidationError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingSecondOrder: return "MissingSecondOrder";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

// Every library failure is reported through this one exception type; the
// code distinguishes the cases callers are expected to branch on.
class FrameError : public std::runtime_error {
 public:
  FrameError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw FrameError(code, what);
}

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::DimensionMismatch, what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace framefit
