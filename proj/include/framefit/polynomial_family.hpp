#pragma once

#include <string>
#include <utility>
#include <vector>

#include "framefit/frame_core.hpp"

namespace framefit {

// F(x) = A0 + sum_p x_p A_p + 1/2 sum_{q,p} x_q x_p C_{qp}, with C symmetric.
//
// Covers constant (no terms), affine and quadratic families. Used as a test
// bed for the calculus with known closed-form jets, and as a generic family
// for callers that can express their frames polynomially.
template <typename Scalar>
class PolynomialFamily final : public FrameFamily<Scalar> {
 public:
  using MatrixType = Matrix<Scalar>;

  PolynomialFamily(MatrixType constant, Index params)
      : A0_(std::move(constant)), P_(params) {
    linear_.assign(static_cast<std::size_t>(P_), MatrixType::Zero(A0_.rows(), A0_.cols()));
    quadratic_.assign(static_cast<std::size_t>(P_ * (P_ + 1) / 2), MatrixType::Zero(A0_.rows(), A0_.cols()));
  }

  PolynomialFamily& set_linear(Index p, MatrixType A) {
    check_shape(A);
    linear_.at(static_cast<std::size_t>(p)) = std::move(A);
    return *this;
  }

  // Sets C_{qp} = C_{pq}.
  PolynomialFamily& set_quadratic(Index q, Index p, MatrixType C) {
    check_shape(C);
    quadratic_.at(FrameJet<Scalar>::triangle_index(q, p, P_)) = std::move(C);
    return *this;
  }

  // Restricts Omega to an open box in addition to the frame condition.
  PolynomialFamily& set_box(Vector<Scalar> lower, Vector<Scalar> upper) {
    require_dims(lower.size() == P_ && upper.size() == P_, "PolynomialFamily: box has wrong dimension");
    lower_ = std::move(lower);
    upper_ = std::move(upper);
    return *this;
  }

  Index rows() const override { return A0_.rows(); }
  Index cols() const override { return A0_.cols(); }
  Index params() const override { return P_; }

  FrameJet<Scalar> jet(const ParameterPoint<Scalar>& x, int order) const override {
    check_point(*this, x);
    MatrixType F = A0_;
    for (Index p = 0; p < P_; ++p) F += x(p) * linear(p);
    for (Index q = 0; q < P_; ++q) {
      for (Index p = 0; p < P_; ++p) F += Scalar(0.5) * x(q) * x(p) * quadratic(q, p);
    }
    if (order <= 0) return FrameJet<Scalar>(std::move(F));

    std::vector<MatrixType> dF;
    dF.reserve(static_cast<std::size_t>(P_));
    for (Index p = 0; p < P_; ++p) {
      MatrixType d = linear(p);
      for (Index q = 0; q < P_; ++q) d += x(q) * quadratic(q, p);
      dF.push_back(std::move(d));
    }
    if (order == 1) return FrameJet<Scalar>(std::move(F), std::move(dF));
    return FrameJet<Scalar>(std::move(F), std::move(dF), quadratic_);
  }

  bool contains(const ParameterPoint<Scalar>& x) const override {
    if (lower_.size() == P_ && x.size() == P_) {
      if ((x.array() <= lower_.array()).any() || (x.array() >= upper_.array()).any()) return false;
    }
    return FrameFamily<Scalar>::contains(x);
  }

 private:
  const MatrixType& linear(Index p) const { return linear_[static_cast<std::size_t>(p)]; }
  const MatrixType& quadratic(Index q, Index p) const { return quadratic_[FrameJet<Scalar>::triangle_index(q, p, P_)]; }

  void check_shape(const MatrixType& A) const {
    require_dims(A.rows() == A0_.rows() && A.cols() == A0_.cols(),
                 "PolynomialFamily: coefficient must be " + std::to_string(A0_.rows()) + "x" +
                     std::to_string(A0_.cols()));
  }

  MatrixType A0_;
  Index P_;
  std::vector<MatrixType> linear_;
  std::vector<MatrixType> quadratic_;
  Vector<Scalar> lower_;
  Vector<Scalar> upper_;
};

}  // namespace framefit
