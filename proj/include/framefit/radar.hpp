#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "framefit/frame_core.hpp"
#include "framefit/rng.hpp"

namespace framefit {

// Fixed transmitter/receiver pairs; column n of each matrix is a_n resp. b_n.
template <typename Scalar>
struct RadarGeometry {
  Matrix<Scalar> transmitters;  // M x N
  Matrix<Scalar> receivers;     // M x N

  Index dim() const { return transmitters.rows(); }
  Index pairs() const { return transmitters.cols(); }
};

template <typename Scalar>
struct TargetState {
  Vector<Scalar> position;
  Vector<Scalar> velocity;
};

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

template <typename Scalar>
void validate(const RadarGeometry<Scalar>& g) {
  const Index M = g.transmitters.rows();
  if (M != 2 && M != 3) fail(ErrorCode::ValidationError, "radar geometry: dimension must be 2 or 3, got " + std::to_string(M));
  if (g.receivers.rows() != M || g.receivers.cols() != g.transmitters.cols()) {
    fail(ErrorCode::ValidationError, "radar geometry: transmitters and receivers must have equal count and dimension");
  }
  if (g.transmitters.cols() < 1) fail(ErrorCode::ValidationError, "radar geometry: need at least one pair");
  if (!g.transmitters.allFinite() || !g.receivers.allFinite()) {
    fail(ErrorCode::ValidationError, "radar geometry: non-finite coordinates");
  }
}

// Largest distance between any two sensors.
template <typename Scalar>
Scalar scene_diameter(const RadarGeometry<Scalar>& g) {
  Matrix<Scalar> all(g.dim(), 2 * g.pairs());
  all << g.transmitters, g.receivers;
  Scalar d = 0;
  for (Index i = 0; i < all.cols(); ++i) {
    for (Index j = i + 1; j < all.cols(); ++j) d = std::max(d, (all.col(i) - all.col(j)).norm());
  }
  return d;
}

// Minimum admissible target-to-sensor distance.
template <typename Scalar>
Scalar singularity_tolerance(const RadarGeometry<Scalar>& g) {
  return Scalar(1e-9) * std::max(Scalar(1), scene_diameter(g));
}

// phi_n(x) = |x - a_n| + |x - b_n|
template <typename Scalar>
Scalar bistatic_distance(const RadarGeometry<Scalar>& g, Index n, const VectorArg<Scalar>& x) {
  require_dims(n >= 0 && n < g.pairs(), "bistatic_distance: pair index out of range");
  require_dims(x.size() == g.dim(), "bistatic_distance: point has wrong dimension");
  return (x - g.transmitters.col(n)).norm() + (x - g.receivers.col(n)).norm();
}

// x/|x| with its first and second partials.
template <typename Scalar>
struct UnitVectorJet {
  Vector<Scalar> value;
  Matrix<Scalar> projector;             // pi(x) = I - x x^* / |x|^2
  Matrix<Scalar> first;                 // column p: d/dx_p (x/|x|) = pi(x) e_p / |x|
  std::vector<Vector<Scalar>> second;   // index q * M + p

  const Vector<Scalar>& d2(Index q, Index p) const {
    return second[static_cast<std::size_t>(q * value.size() + p)];
  }
};

template <typename Scalar>
UnitVectorJet<Scalar> unit_vector_jet(const VectorArg<Scalar>& x, Scalar tolerance = Scalar(0), int order = 2) {
  const Index M = x.size();
  const Scalar r = x.norm();
  if (!(r > tolerance) || r == Scalar(0)) {
    fail(ErrorCode::NearSingular, "unit_vector_jet: |x| = " + std::to_string(double(r)) + " is within tolerance " +
                                      std::to_string(double(tolerance)));
  }
  UnitVectorJet<Scalar> out;
  out.value = x / r;
  out.projector = Matrix<Scalar>::Identity(M, M) - out.value * out.value.transpose();
  if (order < 1) return out;
  out.first = out.projector / r;
  if (order < 2) return out;

  // d2/dx_q dx_p (x/|x|) = -[pi (e_p x_q + e_q x_p) + pi_{pq} x] / |x|^3
  const Scalar r3 = r * r * r;
  out.second.reserve(static_cast<std::size_t>(M * M));
  for (Index q = 0; q < M; ++q) {
    for (Index p = 0; p < M; ++p) {
      Vector<Scalar> v = out.projector.col(p) * x(q) + out.projector.col(q) * x(p) + out.projector(p, q) * x;
      out.second.push_back(-v / r3);
    }
  }
  return out;
}

// f_n(x) = grad phi_n(x): sum of the unit vectors from a_n and from b_n to x.
template <typename Scalar>
Vector<Scalar> frame_element(const RadarGeometry<Scalar>& g, Index n, const VectorArg<Scalar>& x) {
  require_dims(n >= 0 && n < g.pairs(), "frame_element: pair index out of range");
  require_dims(x.size() == g.dim(), "frame_element: point has wrong dimension");
  const Scalar tol = singularity_tolerance(g);
  return unit_vector_jet<Scalar>(x - g.transmitters.col(n), tol, 0).value +
         unit_vector_jet<Scalar>(x - g.receivers.col(n), tol, 0).value;
}

// The FDOA multistatic frame family, P = M, f_n(x) = grad phi_n(x).
template <typename Scalar>
class RadarFamily final : public FrameFamily<Scalar> {
 public:
  explicit RadarFamily(RadarGeometry<Scalar> geometry) : geometry_(std::move(geometry)) {
    validate(geometry_);
    tolerance_ = singularity_tolerance(geometry_);
  }

  Index rows() const override { return geometry_.dim(); }
  Index cols() const override { return geometry_.pairs(); }
  Index params() const override { return geometry_.dim(); }

  const RadarGeometry<Scalar>& geometry() const { return geometry_; }
  Scalar tolerance() const { return tolerance_; }

  FrameJet<Scalar> jet(const ParameterPoint<Scalar>& x, int order) const override {
    check_point(*this, x);
    const Index M = rows();
    const Index N = cols();
    Matrix<Scalar> F(M, N);
    std::vector<Matrix<Scalar>> dF(order >= 1 ? static_cast<std::size_t>(M) : 0, Matrix<Scalar>(M, N));
    std::vector<Matrix<Scalar>> d2F(order >= 2 ? static_cast<std::size_t>(M * (M + 1) / 2) : 0, Matrix<Scalar>(M, N));

    for (Index n = 0; n < N; ++n) {
      const auto ja = unit_vector_jet<Scalar>(x - geometry_.transmitters.col(n), tolerance_, order);
      const auto jb = unit_vector_jet<Scalar>(x - geometry_.receivers.col(n), tolerance_, order);
      F.col(n) = ja.value + jb.value;
      if (order < 1) continue;
      for (Index p = 0; p < M; ++p) dF[static_cast<std::size_t>(p)].col(n) = ja.first.col(p) + jb.first.col(p);
      if (order < 2) continue;
      for (Index q = 0; q < M; ++q) {
        for (Index p = q; p < M; ++p) {
          d2F[FrameJet<Scalar>::triangle_index(q, p, M)].col(n) = ja.d2(q, p) + jb.d2(q, p);
        }
      }
    }
    if (order < 1) return FrameJet<Scalar>(std::move(F));
    if (order < 2) return FrameJet<Scalar>(std::move(F), std::move(dF));
    return FrameJet<Scalar>(std::move(F), std::move(dF), std::move(d2F));
  }

 private:
  RadarGeometry<Scalar> geometry_;
  Scalar tolerance_;
};

template <typename Scalar>
RadarFamily<Scalar> radar_family(RadarGeometry<Scalar> geometry) {
  return RadarFamily<Scalar>(std::move(geometry));
}

// Adds sigma * N(0, 1) draws from the seeded stream to each entry of w.
template <typename Scalar>
void add_noise(Vector<Scalar>& w, SplitMix64& rng, double sigma) {
  if (sigma < 0 || !std::isfinite(sigma)) fail(ErrorCode::ValidationError, "noise sigma must be finite and >= 0");
  if (sigma == 0) return;
  for (Index n = 0; n < w.size(); ++n) w(n) += Scalar(sigma * rng.gaussian());
}

// Noise-free FDOA vector F^*(x) v, checked to be taken inside Omega.
template <typename Scalar>
Vector<Scalar> fdoa_coefficients(const RadarFamily<Scalar>& family, const VectorArg<Scalar>& position,
                                 const VectorArg<Scalar>& velocity) {
  require_dims(velocity.size() == family.rows(), "target velocity has wrong dimension");
  const auto jet = family.jet(position, 0);
  if (!is_frame<Scalar>(jet.F())) {
    fail(ErrorCode::RankDeficient, "target position is outside the frame domain (F(x) is rank deficient)");
  }
  return jet.F().transpose() * velocity;
}

// w = F^*(x0) v0 + eps, eps_n i.i.d. N(0, sigma^2).
template <typename Scalar>
Measurement<Scalar> simulate_fdoa(const RadarGeometry<Scalar>& geometry, const TargetState<Scalar>& truth,
                                  const NoiseModel& noise) {
  const RadarFamily<Scalar> family(geometry);
  Measurement<Scalar> w = fdoa_coefficients(family, truth.position, truth.velocity);
  SplitMix64 rng(noise.seed);
  add_noise(w, rng, noise.sigma);
  return w;
}

}  // namespace framefit
