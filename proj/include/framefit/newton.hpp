#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "framefit/calculus.hpp"
#include "framefit/frame_core.hpp"

namespace framefit {

// Tensor grid: counts[p] points from lower[p] to upper[p] inclusive (a single
// point sits at lower[p]). Points are enumerated with the first coordinate
// varying slowest, which is also the tie-break order.
template <typename Scalar>
struct GridSpec {
  Vector<Scalar> lower;
  Vector<Scalar> upper;
  std::vector<Index> counts;

  Index dim() const { return lower.size(); }

  Index size() const {
    Index total = 1;
    for (Index c : counts) total *= c;
    return total;
  }

  Scalar spacing(Index p) const {
    const Index c = counts[static_cast<std::size_t>(p)];
    return c > 1 ? (upper(p) - lower(p)) / Scalar(c - 1) : Scalar(0);
  }

  // Point with lexicographic linear index `k`.
  Vector<Scalar> point(Index k) const {
    Vector<Scalar> x(dim());
    for (Index p = dim() - 1; p >= 0; --p) {
      const Index c = counts[static_cast<std::size_t>(p)];
      x(p) = lower(p) + Scalar(k % c) * spacing(p);
      k /= c;
    }
    return x;
  }
};

template <typename Scalar>
void validate(const GridSpec<Scalar>& grid, Index params) {
  const std::string prefix = "grid: ";
  if (grid.lower.size() != params || grid.upper.size() != params ||
      static_cast<Index>(grid.counts.size()) != params) {
    fail(ErrorCode::ValidationError, prefix + "lower, upper and counts must all have length " + std::to_string(params));
  }
  if (!grid.lower.allFinite() || !grid.upper.allFinite()) fail(ErrorCode::ValidationError, prefix + "non-finite bounds");
  for (Index p = 0; p < params; ++p) {
    if (!(grid.lower(p) < grid.upper(p))) {
      fail(ErrorCode::ValidationError, prefix + "lower must be < upper in coordinate " + std::to_string(p));
    }
    if (grid.counts[static_cast<std::size_t>(p)] < 1) {
      fail(ErrorCode::ValidationError, prefix + "counts must be positive in coordinate " + std::to_string(p));
    }
  }
}

template <typename Scalar>
struct GridScan {
  ParameterPoint<Scalar> best;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  Index best_index = -1;
  Scalar max_value = Scalar(0);
  Index in_domain = 0;
};

// Exhaustive evaluation of E over the in-Omega grid points.
template <typename Scalar>
GridScan<Scalar> grid_scan(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w, const GridSpec<Scalar>& grid) {
  validate(grid, family.params());
  check_measurement(family, w);
  GridScan<Scalar> scan;
  const Index total = grid.size();
  for (Index k = 0; k < total; ++k) {
    const auto x = grid.point(k);
    if (!family.contains(x)) continue;
    const Scalar e = error_value(family, x, w);
    ++scan.in_domain;
    scan.max_value = std::max(scan.max_value, e);
    if (e < scan.best_value) {
      scan.best_value = e;
      scan.best_index = k;
      scan.best = x;
    }
  }
  if (scan.in_domain == 0) fail(ErrorCode::EmptyDomain, "grid_search: no grid point lies in the frame domain");
  return scan;
}

template <typename Scalar>
ParameterPoint<Scalar> grid_search(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w,
                                   const GridSpec<Scalar>& grid) {
  return grid_scan(family, w, grid).best;
}

template <typename Scalar>
struct SolverConfig {
  Scalar step_size = Scalar(1);          // gamma, initial step before backtracking
  int max_iters = 100;
  Scalar grad_tol = Scalar(1e-10);
  Scalar step_tol = Scalar(1e-12);
  Scalar regularization = Scalar(0);     // lambda_0, first Hessian shift tried
  int max_backtracks = 20;
  GridSpec<Scalar> grid;
};

template <typename Scalar>
void validate(const SolverConfig<Scalar>& cfg, Index params) {
  if (!(cfg.step_size > Scalar(0) && cfg.step_size <= Scalar(1))) {
    fail(ErrorCode::ValidationError, "solver: step size gamma must lie in (0, 1]");
  }
  if (cfg.max_iters < 1) fail(ErrorCode::ValidationError, "solver: max_iters must be positive");
  if (!(cfg.grad_tol > Scalar(0)) || !(cfg.step_tol > Scalar(0))) {
    fail(ErrorCode::ValidationError, "solver: tolerances must be positive");
  }
  if (!(cfg.regularization >= Scalar(0))) fail(ErrorCode::ValidationError, "solver: regularization must be >= 0");
  if (cfg.max_backtracks < 0) fail(ErrorCode::ValidationError, "solver: max_backtracks must be >= 0");
  validate(cfg.grid, params);
}

enum class SolveStatus { GradientConverged, StepConverged, MaxIters, LeftDomain };

constexpr std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::GradientConverged: return "GradientConverged";
    case SolveStatus::StepConverged: return "StepConverged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::LeftDomain: return "LeftDomain";
  }
  return "Unknown";
}

template <typename Scalar>
struct Iterate {
  ParameterPoint<Scalar> x;
  Scalar value;
  Scalar grad_norm;
};

template <typename Scalar>
struct SolveResult {
  ParameterPoint<Scalar> minimizer;
  Scalar value;
  std::vector<Iterate<Scalar>> iterates;
  SolveStatus status;
  GridScan<Scalar> initial;

  Index iterations() const { return static_cast<Index>(iterates.size()) - 1; }
};

namespace detail {

// Newton direction d = (H + lambda I)^{-1} g with the smallest lambda in
// {0, lambda_0, 2 lambda_0, ...} giving a solvable system and <g, d> > 0.
template <typename Scalar>
Vector<Scalar> shifted_newton_direction(const Matrix<Scalar>& H, const Vector<Scalar>& g, Scalar lambda0) {
  const Index P = g.size();
  const Scalar h_norm = H.norm();
  const Scalar limit = Scalar(1e12) * std::max(h_norm, std::numeric_limits<Scalar>::min());
  Scalar lambda = 0;
  const Scalar first_shift = std::max(lambda0, Scalar(1e-12) * std::max(h_norm, g.norm()));
  while (true) {
    const Matrix<Scalar> shifted = H + lambda * Matrix<Scalar>::Identity(P, P);
    Eigen::FullPivLU<Matrix<Scalar>> lu(shifted);
    if (lu.isInvertible()) {
      Vector<Scalar> d = lu.solve(g);
      if (d.allFinite() && g.dot(d) > Scalar(0)) return d;
    }
    lambda = lambda == Scalar(0) ? first_shift : Scalar(2) * lambda;
    if (lambda > limit && lambda > first_shift) {
      fail(ErrorCode::SingularHessian, "newton_step: no Hessian shift up to 1e12*|H| gives a descent direction");
    }
  }
}

// One damped Newton update from x with value/gradient/Hessian already known.
template <typename Scalar>
ParameterPoint<Scalar> newton_update(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w,
                                     const VectorArg<Scalar>& x, const Derivatives<Scalar>& d,
                                     const SolverConfig<Scalar>& cfg) {
  if (d.gradient.squaredNorm() == Scalar(0)) return x;
  const Vector<Scalar> direction = shifted_newton_direction(d.hessian, d.gradient, cfg.regularization);
  Scalar gamma = cfg.step_size;
  bool stayed_inside = false;
  for (int attempt = 0; attempt <= cfg.max_backtracks; ++attempt, gamma /= Scalar(2)) {
    const ParameterPoint<Scalar> trial = x - gamma * direction;
    if (!family.contains(trial)) continue;
    stayed_inside = true;
    if (error_value(family, trial, w) <= d.value) return trial;
  }
  if (!stayed_inside) fail(ErrorCode::LeftDomain, "newton_step: every backtracked step left the frame domain");
  return x;
}

}  // namespace detail

// x_{k+1} = x_k - gamma (H + lambda I)^{-1} grad E(x_k), gamma halved while E
// increases or the trial point leaves Omega. Returns x_k when no halving
// decreases E.
template <typename Scalar>
ParameterPoint<Scalar> newton_step(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w,
                                   const VectorArg<Scalar>& x, const SolverConfig<Scalar>& cfg) {
  if (!family.contains(x)) fail(ErrorCode::RankDeficient, "newton_step: starting point is outside the frame domain");
  return detail::newton_update(family, w, x, error_derivatives(family, x, w), cfg);
}

// Grid-search initialisation followed by damped Newton iterations.
template <typename Scalar>
SolveResult<Scalar> localize(const FrameFamily<Scalar>& family, const VectorArg<Scalar>& w,
                             const SolverConfig<Scalar>& cfg) {
  validate(cfg, family.params());
  SolveResult<Scalar> result;
  result.initial = grid_scan(family, w, cfg.grid);
  result.status = SolveStatus::MaxIters;

  ParameterPoint<Scalar> x = result.initial.best;
  Derivatives<Scalar> d = error_derivatives(family, x, w);
  result.iterates.push_back({x, d.value, d.gradient.norm()});

  for (int k = 0;; ++k) {
    if (d.gradient.norm() < cfg.grad_tol) {
      result.status = SolveStatus::GradientConverged;
      break;
    }
    if (k == cfg.max_iters) break;

    ParameterPoint<Scalar> next;
    try {
      next = detail::newton_update(family, w, x, d, cfg);
    } catch (const FrameError& e) {
      if (e.code() != ErrorCode::LeftDomain) throw;
      result.status = SolveStatus::LeftDomain;
      break;
    }
    const Scalar step = (next - x).norm();
    x = std::move(next);
    d = error_derivatives(family, x, w);
    result.iterates.push_back({x, d.value, d.gradient.norm()});
    if (step < cfg.step_tol) {
      result.status = d.gradient.norm() < cfg.grad_tol ? SolveStatus::GradientConverged : SolveStatus::StepConverged;
      break;
    }
  }
  result.minimizer = x;
  result.value = d.value;
  return result;
}

}  // namespace framefit
