#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "framefit/types.hpp"

namespace framefit {

// A point x of the parameter domain (length P) and a data vector w (length N).
// Both are plain Eigen vectors; validity is checked where they meet a family.
template <typename Scalar>
using ParameterPoint = Vector<Scalar>;
template <typename Scalar>
using Measurement = Vector<Scalar>;

// Columns of F must span R^M with sigma_min > kRankTolerance * sigma_max.
inline constexpr double kRankTolerance = 1e-8;

// Synthesis matrix F(x) together with its parameter partials.
//
// Second partials are stored for q <= p only; d2F(q, p) and d2F(p, q) return the
// same matrix. Families that compute the full P x P array go through
// from_full(), which validates the symmetry before discarding the lower half.
template <typename Scalar>
class FrameJet {
 public:
  using MatrixType = Matrix<Scalar>;

  FrameJet() = default;

  explicit FrameJet(MatrixType F) : F_(std::move(F)) {}

  FrameJet(MatrixType F, std::vector<MatrixType> dF)
      : F_(std::move(F)), dF_(std::move(dF)) {
    for (const auto& d : dF_) {
      require_dims(d.rows() == F_.rows() && d.cols() == F_.cols(),
                   "FrameJet: first partial has wrong shape");
    }
  }

  // `upper` is indexed by triangle_index(q, p) for q <= p.
  FrameJet(MatrixType F, std::vector<MatrixType> dF, std::vector<MatrixType> upper)
      : FrameJet(std::move(F), std::move(dF)) {
    const Index P = params();
    require_dims(static_cast<Index>(upper.size()) == P * (P + 1) / 2,
                 "FrameJet: second-order triangle has wrong length");
    for (const auto& d : upper) {
      require_dims(d.rows() == F_.rows() && d.cols() == F_.cols(),
                   "FrameJet: second partial has wrong shape");
    }
    d2F_ = std::move(upper);
    has_second_ = true;
  }

  static FrameJet from_full(MatrixType F, std::vector<MatrixType> dF,
                            const std::vector<std::vector<MatrixType>>& full,
                            Scalar tol = Scalar(1e-12)) {
    const Index P = static_cast<Index>(dF.size());
    require_dims(static_cast<Index>(full.size()) == P, "FrameJet: full second-order array is not P x P");
    std::vector<MatrixType> upper;
    upper.reserve(static_cast<std::size_t>(P * (P + 1) / 2));
    for (Index q = 0; q < P; ++q) {
      require_dims(static_cast<Index>(full[q].size()) == P, "FrameJet: full second-order array is not P x P");
    }
    for (Index q = 0; q < P; ++q) {
      for (Index p = q; p < P; ++p) {
        const auto& a = full[q][p];
        const auto& b = full[p][q];
        const Scalar scale = std::max<Scalar>(Scalar(1), std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
        if ((a - b).cwiseAbs().maxCoeff() > tol * scale) {
          fail(ErrorCode::ValidationError, "FrameJet: mixed partials d2F[" + std::to_string(q) + "][" +
                                               std::to_string(p) + "] are not symmetric");
        }
        upper.push_back(a);
      }
    }
    return FrameJet(std::move(F), std::move(dF), std::move(upper));
  }

  static constexpr std::size_t triangle_index(Index q, Index p, Index P) {
    if (q > p) std::swap(q, p);
    return static_cast<std::size_t>(q * P - q * (q - 1) / 2 + (p - q));
  }

  Index rows() const { return F_.rows(); }
  Index cols() const { return F_.cols(); }
  Index params() const { return static_cast<Index>(dF_.size()); }
  int order() const { return has_second_ ? 2 : (dF_.empty() ? 0 : 1); }
  bool has_first() const { return !dF_.empty(); }
  bool has_second() const { return has_second_; }

  const MatrixType& F() const { return F_; }
  const MatrixType& dF(Index p) const { return dF_.at(static_cast<std::size_t>(p)); }
  const std::vector<MatrixType>& dF() const { return dF_; }

  const MatrixType& d2F(Index q, Index p) const {
    if (!has_second_) fail(ErrorCode::MissingSecondOrder, "FrameJet: second-order partials were not evaluated");
    return d2F_.at(triangle_index(q, p, params()));
  }

 private:
  MatrixType F_;
  std::vector<MatrixType> dF_;
  std::vector<MatrixType> d2F_;
  bool has_second_ = false;
};

// A parametrized family x -> F(x) of M x N synthesis matrices over a domain
// Omega in R^P. Implementations must be deterministic and immutable.
template <typename Scalar>
class FrameFamily {
 public:
  virtual ~FrameFamily() = default;

  virtual Index rows() const = 0;    // M
  virtual Index cols() const = 0;    // N
  virtual Index params() const = 0;  // P

  // Jet of the requested order (0, 1 or 2). May throw NearSingular for points
  // where the family itself is undefined; rank is not checked here.
  virtual FrameJet<Scalar> jet(const ParameterPoint<Scalar>& x, int order) const = 0;

  // Membership in Omega: finite, right length, family defined and F(x) a frame.
  virtual bool contains(const ParameterPoint<Scalar>& x) const;
};

template <typename Scalar>
Vector<Scalar> singular_values(const Matrix<Scalar>& F) {
  if (F.size() == 0) return Vector<Scalar>();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(F);
  return svd.singularValues();
}

// True when the columns of F span R^M under the relative rank tolerance.
template <typename Scalar>
bool is_frame(const Matrix<Scalar>& F, Scalar rel_tol = Scalar(kRankTolerance)) {
  if (F.rows() == 0 || F.cols() < F.rows()) return false;
  const Vector<Scalar> s = singular_values<Scalar>(F);
  return s.size() == F.rows() && s(0) > Scalar(0) && s(s.size() - 1) > rel_tol * s(0);
}

template <typename Scalar>
bool FrameFamily<Scalar>::contains(const ParameterPoint<Scalar>& x) const {
  if (x.size() != params() || !x.allFinite()) return false;
  try {
    return is_frame<Scalar>(jet(x, 0).F());
  } catch (const FrameError&) {
    return false;
  }
}

enum class DualMethod { QR, SVD };

// G = F^*(F F^*)^{-1}, the adjoint of the canonical dual synthesis operator.
// Satisfies F G = I_M. Never forms (F F^*)^{-1}.
template <typename Scalar>
Matrix<Scalar> dual_synthesis(const Matrix<Scalar>& F, DualMethod method = DualMethod::QR) {
  const Index M = F.rows();
  const Index N = F.cols();
  if (M == 0 || N < M) {
    fail(ErrorCode::RankDeficient, "dual_synthesis: " + std::to_string(N) + " vectors cannot span R^" +
                                       std::to_string(M));
  }

  if (method == DualMethod::SVD) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector<Scalar>& s = svd.singularValues();
    if (!(s(M - 1) > Scalar(kRankTolerance) * s(0))) {
      fail(ErrorCode::RankDeficient, "dual_synthesis: smallest singular value " + std::to_string(double(s(M - 1))) +
                                         " below rank tolerance");
    }
    return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  }

  const Vector<Scalar> s = singular_values<Scalar>(F);
  if (!(s(M - 1) > Scalar(kRankTolerance) * s(0))) {
    fail(ErrorCode::RankDeficient, "dual_synthesis: smallest singular value " + std::to_string(double(s(M - 1))) +
                                       " below rank tolerance");
  }
  // F^* = Q R  =>  F F^* = R^T R  and  G = Q R^{-T}.
  Eigen::HouseholderQR<Matrix<Scalar>> qr(F.transpose());
  const Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(N, M);
  const Matrix<Scalar> R = qr.matrixQR().topRows(M).template triangularView<Eigen::Upper>();
  const Matrix<Scalar> Gt = R.template triangularView<Eigen::Upper>().solve(Q.transpose());
  return Gt.transpose();
}

// Pi w = w - G (F w): orthogonal projection of w onto the null space of F.
template <typename Scalar>
Vector<Scalar> project_null(const Matrix<Scalar>& F, const Matrix<Scalar>& G, const Vector<Scalar>& w) {
  require_dims(w.size() == F.cols(), "project_null: w has length " + std::to_string(w.size()) + ", expected " +
                                         std::to_string(F.cols()));
  require_dims(G.rows() == F.cols() && G.cols() == F.rows(), "project_null: dual has wrong shape");
  return w - G * (F * w);
}

template <typename Scalar>
void check_point(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x) {
  require_dims(x.size() == family.params(),
               "parameter point has length " + std::to_string(x.size()) + ", expected " +
                   std::to_string(family.params()));
  if (!x.allFinite()) fail(ErrorCode::ValidationError, "parameter point has non-finite entries");
}

template <typename Scalar>
void check_measurement(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w) {
  require_dims(w.size() == family.cols(),
               "measurement has length " + std::to_string(w.size()) + ", expected " + std::to_string(family.cols()));
  if (!w.allFinite()) fail(ErrorCode::ValidationError, "measurement has non-finite entries");
}

// E(x) = |Pi(x) w|^2, the squared distance from w to the range of F^*(x).
template <typename Scalar>
Scalar error_value(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x, const VectorArg<Scalar>& w) {
  check_point(family, x);
  check_measurement(family, w);
  const auto jet = family.jet(x, 0);
  const Matrix<Scalar> G = dual_synthesis<Scalar>(jet.F());
  return project_null<Scalar>(jet.F(), G, w).squaredNorm();
}

template <typename Scalar>
struct FrameBounds {
  Scalar lower;  // A
  Scalar upper;  // B
};

// Optimal frame bounds: extreme eigenvalues of F F^*, i.e. squared extreme
// singular values of F. A is 0 when the columns do not span R^M.
template <typename Scalar>
FrameBounds<Scalar> frame_bounds(const Matrix<Scalar>& F) {
  const Vector<Scalar> s = singular_values<Scalar>(F);
  if (s.size() == 0) return {Scalar(0), Scalar(0)};
  const Scalar largest = s(0) * s(0);
  const Scalar smallest = s.size() < F.rows() ? Scalar(0) : s(s.size() - 1) * s(s.size() - 1);
  return {smallest, largest};
}

}  // namespace framefit
