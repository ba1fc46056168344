#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the projector calculus; the dense assemblies below invert FF^*
// explicitly, which the library never does.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "framefit/framefit.hpp"

namespace framefit::testing {

using Vec = Vector<double>;
using Mat = Matrix<double>;

inline Mat random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = dist(rng);
  return A;
}

inline Vec random_vector(std::mt19937_64& rng, Index n) { return random_matrix(rng, n, 1); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double rel_inf_error(const Mat& got, const Mat& want) {
  const double scale = std::max(1e-300, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

// Random quadratic family F(x) = A0 + sum x_p A_p + 1/2 sum x_q x_p C_qp.
inline PolynomialFamily<double> random_polynomial_family(std::mt19937_64& rng, Index M, Index N, Index P) {
  Mat A0 = random_matrix(rng, M, N);
  PolynomialFamily<double> fam(A0, P);
  for (Index p = 0; p < P; ++p) fam.set_linear(p, 0.5 * random_matrix(rng, M, N));
  for (Index q = 0; q < P; ++q)
    for (Index p = q; p < P; ++p) fam.set_quadratic(q, p, 0.3 * random_matrix(rng, M, N));
  return fam;
}

// Dense operators of the calculus built from an explicit inverse.
struct DenseOperators {
  Mat Pi;
  std::vector<Mat> Pi_p;
  std::vector<std::vector<Mat>> Pi_qp;
};

inline DenseOperators dense_operators(const FrameJet<double>& jet) {
  const Mat& F = jet.F();
  const Index N = F.cols();
  const Index P = jet.params();
  const Mat inv = (F * F.transpose()).inverse();
  const Mat Ft_inv = F.transpose() * inv;
  DenseOperators ops;
  ops.Pi = Mat::Identity(N, N) - Ft_inv * F;
  for (Index p = 0; p < P; ++p) ops.Pi_p.push_back(Ft_inv * jet.dF(p));
  ops.Pi_qp.assign(static_cast<std::size_t>(P), std::vector<Mat>(static_cast<std::size_t>(P)));
  for (Index q = 0; q < P; ++q)
    for (Index p = 0; p < P; ++p) ops.Pi_qp[q][p] = Ft_inv * jet.d2F(q, p);
  return ops;
}

// Random 2-D or 3-D scene: sensors at distance [radius, 1.5 radius] from the
// origin in random directions, target uniformly in [-8, 8]^M, speed 5-15 m/s.
struct Scene {
  RadarGeometry<double> geometry;
  TargetState<double> truth;
};

inline Vec random_direction(std::mt19937_64& rng, Index M) {
  Vec d = random_vector(rng, M);
  return d / d.norm();
}

inline Scene random_scene(std::uint64_t seed, Index pairs, Index M = 2, double radius = 20) {
  std::mt19937_64 rng(seed);
  Scene s;
  s.geometry.transmitters.resize(M, pairs);
  s.geometry.receivers.resize(M, pairs);
  for (Index n = 0; n < pairs; ++n) {
    s.geometry.transmitters.col(n) = uniform(rng, radius, 1.5 * radius) * random_direction(rng, M);
    s.geometry.receivers.col(n) = uniform(rng, radius, 1.5 * radius) * random_direction(rng, M);
  }
  s.truth.position = Vec(M);
  for (Index m = 0; m < M; ++m) s.truth.position(m) = uniform(rng, -8, 8);
  s.truth.velocity = uniform(rng, 5, 15) * random_direction(rng, M);
  return s;
}

inline GridSpec<double> square_grid(Index M, double lo, double hi, Index count) {
  return {Vec::Constant(M, lo), Vec::Constant(M, hi), std::vector<Index>(static_cast<std::size_t>(M), count)};
}

// Noiseless FDOA samples along a given motion, sampled on t0 + k dt.
template <typename Motion>
TimeSeries<double> sample_series(const RadarFamily<double>& fam, Motion motion, double t0, double t1, Index steps) {
  TimeSeries<double> data;
  data.times = Vec::LinSpaced(steps + 1, t0, t1);
  data.values.resize(fam.cols(), steps + 1);
  for (Index k = 0; k <= steps; ++k) {
    const auto [x, v] = motion(data.times(k));
    data.values.col(k) = fam.jet(x, 0).F().transpose() * v;
  }
  return data;
}

}  // namespace framefit::testing
