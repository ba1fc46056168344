#pragma once

#include <string>
#include <vector>

#include "framefit/frame_core.hpp"

namespace framefit {

// Vectors from which the gradient and Hessian of E are assembled by inner
// products alone. With G = F^*(FF^*)^{-1}:
//   Pi      = I - G F
//   Pi_p    = G dF_p
//   Pi_{qp} = G d2F_{qp}
// No N x N operator is ever formed.
template <typename Scalar>
struct ProjectorPieces {
  Matrix<Scalar> dual;                    // G, N x M
  Vector<Scalar> dual_coefficients;       // G^* w = (FF^*)^{-1} F w
  Vector<Scalar> Pw;                      // Pi w
  std::vector<Vector<Scalar>> PpPw;       // Pi_p Pi w
  std::vector<Vector<Scalar>> Pps_w;      // Pi_p^* w
  std::vector<Vector<Scalar>> P_Pps_w;    // Pi Pi_p^* w
  std::vector<Vector<Scalar>> Pqp_Pw;     // Pi_{qp} Pi w, upper triangle

  Index params() const { return static_cast<Index>(PpPw.size()); }

  const Vector<Scalar>& second(Index q, Index p) const {
    return Pqp_Pw[FrameJet<Scalar>::triangle_index(q, p, params())];
  }
};

template <typename Scalar>
ProjectorPieces<Scalar> projector_pieces(const FrameJet<Scalar>& jet, const VectorArg<Scalar>& w) {
  if (!jet.has_second()) {
    fail(ErrorCode::MissingSecondOrder, "projector_pieces: jet lacks second-order partials");
  }
  require_dims(w.size() == jet.cols(), "projector_pieces: w has length " + std::to_string(w.size()) +
                                           ", expected " + std::to_string(jet.cols()));
  const Index P = jet.params();
  const auto& F = jet.F();

  ProjectorPieces<Scalar> out;
  out.dual = dual_synthesis<Scalar>(F);
  const auto& G = out.dual;
  out.dual_coefficients = G.transpose() * w;
  out.Pw = w - G * (F * w);

  out.PpPw.reserve(static_cast<std::size_t>(P));
  out.Pps_w.reserve(static_cast<std::size_t>(P));
  out.P_Pps_w.reserve(static_cast<std::size_t>(P));
  for (Index p = 0; p < P; ++p) {
    const auto& dF = jet.dF(p);
    out.PpPw.push_back(G * (dF * out.Pw));
    Vector<Scalar> adj = dF.transpose() * out.dual_coefficients;
    out.P_Pps_w.push_back(adj - G * (F * adj));
    out.Pps_w.push_back(std::move(adj));
  }

  out.Pqp_Pw.reserve(static_cast<std::size_t>(P * (P + 1) / 2));
  for (Index q = 0; q < P; ++q) {
    for (Index p = q; p < P; ++p) out.Pqp_Pw.push_back(G * (jet.d2F(q, p) * out.Pw));
  }
  return out;
}

// dE/dx_p = -2 <w, Pi_p Pi w>
template <typename Scalar>
Vector<Scalar> gradient(const ProjectorPieces<Scalar>& pieces, const VectorArg<Scalar>& w) {
  require_dims(w.size() == pieces.Pw.size(), "gradient: w does not match pieces");
  const Index P = pieces.params();
  Vector<Scalar> g(P);
  for (Index p = 0; p < P; ++p) g(p) = Scalar(-2) * w.dot(pieces.PpPw[static_cast<std::size_t>(p)]);
  return g;
}

// One Hessian entry:
//   2<w,(Pi_p Pi_q + Pi_q Pi_p) Pi w> + 2<Pi Pi_p^* w, Pi Pi_q^* w>
//   - 2<Pi_q Pi w, Pi_p Pi w> - 2<w, Pi_{qp} Pi w>
// where <w, Pi_p Pi_q Pi w> is taken as <Pi_p^* w, Pi_q Pi w>.
template <typename Scalar>
Scalar hessian_entry(const ProjectorPieces<Scalar>& pieces, const VectorArg<Scalar>& w, Index q, Index p) {
  const auto i = static_cast<std::size_t>(p);
  const auto j = static_cast<std::size_t>(q);
  const Scalar cross = pieces.Pps_w[i].dot(pieces.PpPw[j]) + pieces.Pps_w[j].dot(pieces.PpPw[i]);
  const Scalar adjoint = pieces.P_Pps_w[i].dot(pieces.P_Pps_w[j]);
  const Scalar first = pieces.PpPw[j].dot(pieces.PpPw[i]);
  const Scalar second = w.dot(pieces.second(q, p));
  return Scalar(2) * (cross + adjoint - first - second);
}

// Upper triangle assembled, then mirrored: the result is exactly symmetric.
template <typename Scalar>
Matrix<Scalar> hessian(const ProjectorPieces<Scalar>& pieces, const VectorArg<Scalar>& w) {
  require_dims(w.size() == pieces.Pw.size(), "hessian: w does not match pieces");
  const Index P = pieces.params();
  Matrix<Scalar> H(P, P);
  for (Index q = 0; q < P; ++q) {
    for (Index p = q; p < P; ++p) {
      H(q, p) = hessian_entry(pieces, w, q, p);
      H(p, q) = H(q, p);
    }
  }
  return H;
}

template <typename Scalar>
struct Derivatives {
  Scalar value;
  Vector<Scalar> gradient;
  Matrix<Scalar> hessian;
};

// E, grad E and Hess E at x from a single order-2 jet evaluation.
template <typename Scalar>
Derivatives<Scalar> error_derivatives(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x,
                                      const VectorArg<Scalar>& w) {
  check_point(family, x);
  check_measurement(family, w);
  const auto pieces = projector_pieces(family.jet(x, 2), w);
  return {pieces.Pw.squaredNorm(), gradient(pieces, w), hessian(pieces, w)};
}

inline constexpr double kGradientStep = 1e-5;
inline constexpr double kHessianStep = 1e-4;

// Central differences of error_value; a test oracle independent of the
// projector calculus.
template <typename Scalar>
Vector<Scalar> fd_gradient(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x,
                           const VectorArg<Scalar>& w, ScalarArg<Scalar> h = Scalar(kGradientStep)) {
  if (!(h > Scalar(0)) || !std::isfinite(double(h))) {
    fail(ErrorCode::InvalidStep, "fd_gradient: step must be positive and finite");
  }
  check_point(family, x);
  const Index P = family.params();
  Vector<Scalar> g(P);
  for (Index p = 0; p < P; ++p) {
    ParameterPoint<Scalar> plus = x;
    ParameterPoint<Scalar> minus = x;
    plus(p) += h;
    minus(p) -= h;
    g(p) = (error_value(family, plus, w) - error_value(family, minus, w)) / (Scalar(2) * h);
  }
  return g;
}

// Central differences of the analytic gradient (column p = d grad / dx_p).
// Not symmetrised, so it also exposes asymmetry in the analytic gradient.
template <typename Scalar>
Matrix<Scalar> fd_hessian(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x,
                          const VectorArg<Scalar>& w, ScalarArg<Scalar> h = Scalar(kHessianStep)) {
  if (!(h > Scalar(0)) || !std::isfinite(double(h))) {
    fail(ErrorCode::InvalidStep, "fd_hessian: step must be positive and finite");
  }
  check_point(family, x);
  const Index P = family.params();
  Matrix<Scalar> H(P, P);
  for (Index p = 0; p < P; ++p) {
    ParameterPoint<Scalar> plus = x;
    ParameterPoint<Scalar> minus = x;
    plus(p) += h;
    minus(p) -= h;
    const auto gp = gradient(projector_pieces(family.jet(plus, 2), w), w);
    const auto gm = gradient(projector_pieces(family.jet(minus, 2), w), w);
    H.col(p) = (gp - gm) / (Scalar(2) * h);
  }
  return H;
}

}  // namespace framefit
