#pragma once

#include <optional>
#include <string>
#include <vector>

#include "framefit/frame_core.hpp"
#include "framefit/newton.hpp"

namespace framefit {

template <typename Scalar>
struct ResidualBound {
  Scalar value_at_truth;  // E(x0)
  Scalar bound;           // |eps|^2
  bool holds;
};

// E(x0) = |Pi(x0) eps|^2 <= |eps|^2 for w = F^*(x0) v0 + eps.
template <typename Scalar>
ResidualBound<Scalar> residual_bound_check(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x0,
                                           const VectorArg<Scalar>& w, ScalarArg<Scalar> eps_norm) {
  const Scalar e = error_value(family, x0, w);
  const Scalar bound = eps_norm * eps_norm;
  return {e, bound, e <= bound + Scalar(1e-12)};
}

template <typename Scalar>
struct LevelSetPoint {
  ParameterPoint<Scalar> x;
  Scalar value;
};

template <typename Scalar>
struct LevelSetReport {
  Scalar threshold;
  Scalar allowance;  // rounding allowance added to the threshold
  std::vector<LevelSetPoint<Scalar>> points;
  GridSpec<Scalar> grid;
  Index in_domain = 0;
  Scalar fraction = 0;
};

// {x on grid : E(x) <= tau}, evaluated exhaustively. Values within
// 1e-18 |w|^2 of the threshold count as inside, so that an E that vanishes
// identically is recognised despite rounding.
template <typename Scalar>
LevelSetReport<Scalar> level_set(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w,
                                 const GridSpec<Scalar>& grid, ScalarArg<Scalar> tau) {
  validate(grid, family.params());
  check_measurement(family, w);
  if (!(tau >= Scalar(0))) fail(ErrorCode::ValidationError, "level_set: threshold must be >= 0");
  LevelSetReport<Scalar> report{tau, Scalar(1e-18) * w.squaredNorm(), {}, grid};
  const Index total = grid.size();
  for (Index k = 0; k < total; ++k) {
    auto x = grid.point(k);
    if (!family.contains(x)) continue;
    ++report.in_domain;
    const Scalar e = error_value(family, x, w);
    if (e <= tau + report.allowance) report.points.push_back({std::move(x), e});
  }
  if (report.in_domain == 0) fail(ErrorCode::EmptyDomain, "level_set: no grid point lies in the frame domain");
  report.fraction = Scalar(report.points.size()) / Scalar(report.in_domain);
  return report;
}

// Column n is f_n(x) stacked on Df_n(x)^* (FF^*)^{-1} F w, an (M+P) x N matrix.
template <typename Scalar>
Matrix<Scalar> augmented_vectors(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x,
                                 const VectorArg<Scalar>& w) {
  check_point(family, x);
  check_measurement(family, w);
  const auto jet = family.jet(x, 1);
  const Index M = family.rows();
  const Index N = family.cols();
  const Index P = family.params();
  const Vector<Scalar> coefficients = dual_synthesis<Scalar>(jet.F()).transpose() * w;

  Matrix<Scalar> out(M + P, N);
  out.topRows(M) = jet.F();
  for (Index p = 0; p < P; ++p) out.row(M + p) = coefficients.transpose() * jet.dF(p);
  return out;
}

template <typename Scalar>
struct UniquenessCertificate {
  std::vector<ParameterPoint<Scalar>> samples;
  std::vector<Scalar> smallest_singular_values;
  std::vector<Scalar> tolerances;
  bool pass = false;
};

// Point-sample check that the augmented vectors form a frame for R^M (+) R^P.
// With no explicit tolerance each sample uses 1e-8 times its largest
// singular value.
template <typename Scalar>
UniquenessCertificate<Scalar> uniqueness_certificate(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w,
                                                     const std::type_identity_t<std::vector<ParameterPoint<Scalar>>>& samples,
                                                     std::type_identity_t<std::optional<Scalar>> tol = std::nullopt) {
  UniquenessCertificate<Scalar> cert;
  cert.samples = samples;
  const Index dim = family.rows() + family.params();
  bool pass = !samples.empty();
  for (const auto& x : samples) {
    Matrix<Scalar> A;
    try {
      A = augmented_vectors(family, x, w);
    } catch (const FrameError& e) {
      if (e.code() != ErrorCode::RankDeficient && e.code() != ErrorCode::NearSingular) throw;
      std::string where;
      for (Index i = 0; i < x.size(); ++i) where += (i ? "," : "") + std::to_string(double(x(i)));
      fail(ErrorCode::RankDeficient, "uniqueness_certificate: sample (" + where + ") is outside the frame domain");
    }
    const Vector<Scalar> s = singular_values<Scalar>(A);
    const Scalar smallest = A.cols() < dim ? Scalar(0) : s(s.size() - 1);
    const Scalar threshold = tol ? *tol : Scalar(kRankTolerance) * (s.size() ? s(0) : Scalar(0));
    cert.smallest_singular_values.push_back(smallest);
    cert.tolerances.push_back(threshold);
    pass = pass && smallest > threshold;
  }
  cert.pass = pass;
  return cert;
}

}  // namespace framefit
