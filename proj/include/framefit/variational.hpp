#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "framefit/frame_core.hpp"
#include "framefit/newton.hpp"

namespace framefit {

// Samples w(t_k) on a uniform grid; column k of `values` is w(t_k).
template <typename Scalar>
struct TimeSeries {
  Vector<Scalar> times;
  Matrix<Scalar> values;  // N x T

  Index samples() const { return times.size(); }
  Scalar step() const { return (times(times.size() - 1) - times(0)) / Scalar(times.size() - 1); }
};

template <typename Scalar>
void validate(const TimeSeries<Scalar>& data) {
  const Index T = data.times.size();
  if (T < 3) fail(ErrorCode::ValidationError, "time series: need at least 3 samples, got " + std::to_string(T));
  if (data.values.cols() != T) {
    fail(ErrorCode::ValidationError, "time series: " + std::to_string(data.values.cols()) + " data columns for " +
                                         std::to_string(T) + " times");
  }
  if (!data.times.allFinite() || !data.values.allFinite()) fail(ErrorCode::ValidationError, "time series: non-finite entries");
  const Scalar dt = data.step();
  const Scalar scale = std::max({dt, std::abs(data.times(0)), std::abs(data.times(T - 1))});
  for (Index k = 0; k + 1 < T; ++k) {
    const Scalar h = data.times(k + 1) - data.times(k);
    if (!(h > Scalar(0))) fail(ErrorCode::ValidationError, "time series: times must be strictly increasing");
    if (std::abs(h - dt) > Scalar(1e-12) * scale) {
      fail(ErrorCode::ValidationError, "time series: spacing is not uniform at sample " + std::to_string(k));
    }
  }
}

enum class TrajectoryStatus { Complete, LeftDomain };

constexpr std::string_view to_string(TrajectoryStatus s) {
  return s == TrajectoryStatus::Complete ? "Complete" : "LeftDomain";
}

template <typename Scalar>
struct Trajectory {
  Vector<Scalar> times;
  Matrix<Scalar> positions;   // M x T
  Matrix<Scalar> velocities;  // M x T
  TrajectoryStatus status = TrajectoryStatus::Complete;

  Index samples() const { return times.size(); }
  bool complete() const { return status == TrajectoryStatus::Complete; }
};

namespace detail {

// Derivative along columns of uniformly sampled data: central differences
// inside, second-order one-sided differences at the two ends.
template <typename Scalar>
Matrix<Scalar> differentiate_columns(const Matrix<Scalar>& values, Scalar dt) {
  const Index T = values.cols();
  Matrix<Scalar> d(values.rows(), T);
  const Scalar inv = Scalar(1) / (Scalar(2) * dt);
  for (Index k = 1; k + 1 < T; ++k) d.col(k) = (values.col(k + 1) - values.col(k - 1)) * inv;
  d.col(0) = (Scalar(-3) * values.col(0) + Scalar(4) * values.col(1) - values.col(2)) * inv;
  d.col(T - 1) = (Scalar(3) * values.col(T - 1) - Scalar(4) * values.col(T - 2) + values.col(T - 3)) * inv;
  return d;
}

template <typename Scalar>
void require_same_grid(const Trajectory<Scalar>& traj, const TimeSeries<Scalar>& data, const char* who) {
  require_dims(traj.times.size() == data.times.size() && traj.positions.cols() == data.times.size() &&
                   traj.velocities.cols() == data.times.size(),
               std::string(who) + ": trajectory and data have different lengths");
  const Scalar tol = Scalar(1e-12) * std::max<Scalar>(Scalar(1), data.times.cwiseAbs().maxCoeff());
  if ((traj.times - data.times).cwiseAbs().maxCoeff() > tol) {
    fail(ErrorCode::ValidationError, std::string(who) + ": trajectory and data use different time grids");
  }
}

template <typename Scalar>
Matrix<Scalar> frame_at(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x, const char* who) {
  auto F = family.jet(x, 0).F();
  if (!is_frame<Scalar>(F)) fail(ErrorCode::RankDeficient, std::string(who) + ": trajectory left the frame domain");
  return F;
}

// r(t_k) = F^*(x(t_k)) xdot(t_k) - w(t_k), column k.
template <typename Scalar>
Matrix<Scalar> residual_columns(const FrameFamily<Scalar>& family, const Trajectory<Scalar>& traj,
                                const TimeSeries<Scalar>& data, const char* who) {
  const Index T = data.samples();
  Matrix<Scalar> r(family.cols(), T);
  for (Index k = 0; k < T; ++k) {
    const Matrix<Scalar> F = frame_at(family, Vector<Scalar>(traj.positions.col(k)), who);
    r.col(k) = F.transpose() * traj.velocities.col(k) - data.values.col(k);
  }
  return r;
}

}  // namespace detail

// Trapezoid-rule value of the integral of |F^*(x(t)) xdot(t) - w(t)|^2.
template <typename Scalar>
Scalar functional_value(const FrameFamily<Scalar>& family, const Trajectory<Scalar>& traj,
                        const TimeSeries<Scalar>& data) {
  validate(data);
  require_dims(data.values.rows() == family.cols(), "functional_value: data rows do not match frame count");
  detail::require_same_grid(traj, data, "functional_value");
  const Matrix<Scalar> r = detail::residual_columns(family, traj, data, "functional_value");
  const Vector<Scalar> integrand = r.colwise().squaredNorm().transpose();
  const Index T = integrand.size();
  return data.step() * (integrand.sum() - Scalar(0.5) * (integrand(0) + integrand(T - 1)));
}

// Acceleration solving F(x) d/dt[F^*(x) xdot - w] = 0 for given x, xdot, wdot:
//   xddot = (FF^*)^{-1} F [wdot - sum_m v_m (dF^*/dx_m) v]
// The quadratic term is the chain rule d/dt F^*(x) = sum_m xdot_m dF^*/dx_m.
template <typename Scalar>
Vector<Scalar> el_acceleration(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x, const VectorArg<Scalar>& v,
                               const VectorArg<Scalar>& wdot) {
  require_dims(v.size() == family.rows() && family.params() == family.rows(),
               "el_acceleration: velocity must live in R^M and the family must have P = M");
  require_dims(wdot.size() == family.cols(), "el_acceleration: wdot has wrong length");
  const auto jet = family.jet(x, 1);
  const Matrix<Scalar> G = dual_synthesis<Scalar>(jet.F());
  Vector<Scalar> forcing = wdot;
  for (Index m = 0; m < family.params(); ++m) forcing -= v(m) * (jet.dF(m).transpose() * v);
  return G.transpose() * forcing;
}

// F(x(t)) applied to the numerical time derivative of the residual r(t).
template <typename Scalar>
Matrix<Scalar> el_residual(const FrameFamily<Scalar>& family, const Trajectory<Scalar>& traj,
                           const TimeSeries<Scalar>& data) {
  validate(data);
  require_dims(data.values.rows() == family.cols(), "el_residual: data rows do not match frame count");
  detail::require_same_grid(traj, data, "el_residual");
  const Matrix<Scalar> r = detail::residual_columns(family, traj, data, "el_residual");
  const Matrix<Scalar> dr = detail::differentiate_columns(r, data.step());
  Matrix<Scalar> out(family.rows(), data.samples());
  for (Index k = 0; k < data.samples(); ++k) {
    out.col(k) = family.jet(Vector<Scalar>(traj.positions.col(k)), 0).F() * dr.col(k);
  }
  return out;
}

// Classical RK4 on (x, xdot) over the data grid. wdot comes from differences
// of the samples, averaged at the half steps. Stops with status LeftDomain
// (and the samples reached so far) if a stage leaves Omega.
template <typename Scalar>
Trajectory<Scalar> integrate_trajectory(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& x0,
                                        const VectorArg<Scalar>& v0, const TimeSeries<Scalar>& data) {
  validate(data);
  const Index M = family.rows();
  require_dims(family.params() == M, "integrate_trajectory: family must have P = M");
  require_dims(x0.size() == M && v0.size() == M, "integrate_trajectory: initial state has wrong dimension");
  require_dims(data.values.rows() == family.cols(), "integrate_trajectory: data rows do not match frame count");

  const Index T = data.samples();
  const Scalar h = data.step();
  const Matrix<Scalar> wdot = detail::differentiate_columns(data.values, h);

  Trajectory<Scalar> traj;
  traj.times = data.times;
  traj.positions.resize(M, T);
  traj.velocities.resize(M, T);

  auto truncate = [&](Index kept) {
    traj.status = TrajectoryStatus::LeftDomain;
    traj.times.conservativeResize(kept);
    traj.positions.conservativeResize(M, kept);
    traj.velocities.conservativeResize(M, kept);
    return traj;
  };

  if (!x0.allFinite() || !v0.allFinite() || !family.contains(x0)) return truncate(0);
  traj.positions.col(0) = x0;
  traj.velocities.col(0) = v0;

  Vector<Scalar> x = x0;
  Vector<Scalar> v = v0;
  for (Index k = 0; k + 1 < T; ++k) {
    const Vector<Scalar> wd0 = wdot.col(k);
    const Vector<Scalar> wd1 = wdot.col(k + 1);
    const Vector<Scalar> wdh = Scalar(0.5) * (wd0 + wd1);
    try {
      const Vector<Scalar> a1 = el_acceleration(family, x, v, wd0);
      const Vector<Scalar> x2 = x + Scalar(0.5) * h * v;
      const Vector<Scalar> v2 = v + Scalar(0.5) * h * a1;
      const Vector<Scalar> a2 = el_acceleration(family, x2, v2, wdh);
      const Vector<Scalar> x3 = x + Scalar(0.5) * h * v2;
      const Vector<Scalar> v3 = v + Scalar(0.5) * h * a2;
      const Vector<Scalar> a3 = el_acceleration(family, x3, v3, wdh);
      const Vector<Scalar> x4 = x + h * v3;
      const Vector<Scalar> v4 = v + h * a3;
      const Vector<Scalar> a4 = el_acceleration(family, x4, v4, wd1);
      x += (h / Scalar(6)) * (v + Scalar(2) * v2 + Scalar(2) * v3 + v4);
      v += (h / Scalar(6)) * (a1 + Scalar(2) * a2 + Scalar(2) * a3 + a4);
    } catch (const FrameError& e) {
      if (e.code() != ErrorCode::RankDeficient && e.code() != ErrorCode::NearSingular) throw;
      return truncate(k + 1);
    }
    if (!x.allFinite() || !v.allFinite() || !family.contains(x)) return truncate(k + 1);
    traj.positions.col(k + 1) = x;
    traj.velocities.col(k + 1) = v;
  }
  return traj;
}

template <typename Scalar>
struct ShootingCandidate {
  Vector<Scalar> position;
  Vector<Scalar> velocity;
  Scalar value;  // +inf when the integration left Omega
};

template <typename Scalar>
struct ShootingResult {
  Trajectory<Scalar> best;
  Scalar value;
  Index best_index;
  std::vector<ShootingCandidate<Scalar>> trace;
};

// Integrates every (x0, v0) on the two grids (position index outer, velocity
// index inner) and keeps the trajectory with the smallest functional value;
// earlier candidates win ties.
template <typename Scalar>
ShootingResult<Scalar> shooting_search(const FrameFamily<Scalar>& family, const TimeSeries<Scalar>& data,
                                       const GridSpec<Scalar>& pos_grid, const GridSpec<Scalar>& vel_grid) {
  validate(data);
  validate(pos_grid, family.params());
  validate(vel_grid, family.rows());

  ShootingResult<Scalar> result{{}, std::numeric_limits<Scalar>::infinity(), -1, {}};
  result.trace.reserve(static_cast<std::size_t>(pos_grid.size() * vel_grid.size()));
  for (Index i = 0; i < pos_grid.size(); ++i) {
    const Vector<Scalar> x0 = pos_grid.point(i);
    for (Index j = 0; j < vel_grid.size(); ++j) {
      const Vector<Scalar> v0 = vel_grid.point(j);
      Scalar value = std::numeric_limits<Scalar>::infinity();
      auto traj = integrate_trajectory(family, x0, v0, data);
      if (traj.complete()) value = functional_value(family, traj, data);
      if (value < result.value) {
        result.value = value;
        result.best = std::move(traj);
        result.best_index = static_cast<Index>(result.trace.size());
      }
      result.trace.push_back({x0, v0, value});
    }
  }
  if (result.best_index < 0) {
    fail(ErrorCode::AllCandidatesFailed, "shooting_search: every candidate trajectory left the frame domain");
  }
  return result;
}

}  // namespace framefit
