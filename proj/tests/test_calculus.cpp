#include <doctest.h>

#include "support.hpp"

using namespace framefit;
using namespace framefit::testing;

namespace {

// Gradient and Hessian formulas evaluated with dense operators, term by term.
Vec dense_gradient(const DenseOperators& ops, const Vec& w) {
  Vec g(static_cast<Index>(ops.Pi_p.size()));
  for (std::size_t p = 0; p < ops.Pi_p.size(); ++p) g(p) = -2 * w.dot(ops.Pi_p[p] * ops.Pi * w);
  return g;
}

Mat dense_hessian(const DenseOperators& ops, const Vec& w) {
  const auto P = ops.Pi_p.size();
  Mat H(P, P);
  const Mat& Pi = ops.Pi;
  for (std::size_t q = 0; q < P; ++q) {
    for (std::size_t p = 0; p < P; ++p) {
      const Mat& A = ops.Pi_p[p];
      const Mat& B = ops.Pi_p[q];
      H(q, p) = 2 * w.dot((A * B + B * A) * Pi * w) + 2 * (Pi * A.transpose() * w).dot(Pi * B.transpose() * w) -
                2 * (B * Pi * w).dot(A * Pi * w) - 2 * w.dot(ops.Pi_qp[q][p] * Pi * w);
    }
  }
  return H;
}

RadarFamily<double> four_pair_family(std::uint64_t seed) { return RadarFamily<double>(random_scene(seed, 4).geometry); }

}  // namespace

TEST_CASE("constant family: every derivative piece vanishes") {
  std::mt19937_64 rng(1);
  PolynomialFamily<double> fam(random_matrix(rng, 2, 5), 3);
  Vec x = random_vector(rng, 3);
  Vec w = random_vector(rng, 5);
  auto pieces = projector_pieces(fam.jet(x, 2), w);
  for (Index p = 0; p < 3; ++p) {
    CHECK(pieces.PpPw[p].norm() == 0.0);
    CHECK(pieces.Pps_w[p].norm() == 0.0);
    CHECK(pieces.P_Pps_w[p].norm() == 0.0);
    for (Index q = 0; q < 3; ++q) CHECK(pieces.second(q, p).norm() == 0.0);
  }
  CHECK(gradient(pieces, w).norm() == 0.0);
  CHECK(hessian(pieces, w).norm() == 0.0);
  CHECK(fd_gradient(fam, x, w).norm() <= 1e-12);
}

TEST_CASE("square invertible frames give zero residual pieces") {
  std::mt19937_64 rng(2);
  auto fam = random_polynomial_family(rng, 3, 3, 2);
  Vec x = 0.1 * random_vector(rng, 2);
  Vec w = random_vector(rng, 3);
  auto pieces = projector_pieces(fam.jet(x, 2), w);
  CHECK(pieces.Pw.norm() <= 1e-12 * w.norm());
  for (Index p = 0; p < 2; ++p) {
    CHECK(pieces.PpPw[p].norm() <= 1e-10 * w.norm());
    for (Index q = 0; q < 2; ++q) CHECK(pieces.second(q, p).norm() <= 1e-10 * w.norm());
  }
}

TEST_CASE("missing second order is reported") {
  std::mt19937_64 rng(3);
  auto fam = random_polynomial_family(rng, 2, 4, 2);
  try {
    projector_pieces(fam.jet(Vec::Zero(2), 1), Vec::Ones(4).eval());
    FAIL("expected MissingSecondOrder");
  } catch (const FrameError& e) {
    CHECK(e.code() == ErrorCode::MissingSecondOrder);
  }
}

TEST_CASE("pieces agree with dense operator assembly") {
  std::mt19937_64 rng(4);
  int compared = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const Index M = 1 + static_cast<Index>(rng() % 5);
    const Index N = M + static_cast<Index>(rng() % (6 - M));
    const Index P = 1 + static_cast<Index>(rng() % 5);
    auto fam = random_polynomial_family(rng, M, N, P);
    Vec x = 0.2 * random_vector(rng, P);
    if (!fam.contains(x)) continue;
    Vec w = random_vector(rng, N);
    auto jet = fam.jet(x, 2);
    // The explicit-inverse oracle loses ~cond(F)^2 digits; keep it meaningful.
    const Vec s = singular_values<double>(jet.F());
    if (s(0) / s(M - 1) > 1e2) continue;
    ++compared;
    auto ops = dense_operators(jet);
    auto pieces = projector_pieces(jet, w);
    const double scale = w.norm();
    auto close = [&](const Vec& got, const Vec& want) {
      return (got - want).cwiseAbs().maxCoeff() <= 1e-10 * std::max(scale, want.cwiseAbs().maxCoeff());
    };
    CHECK(close(pieces.Pw, ops.Pi * w));
    for (Index p = 0; p < P; ++p) {
      CHECK(close(pieces.PpPw[p], ops.Pi_p[p] * ops.Pi * w));
      CHECK(close(pieces.Pps_w[p], ops.Pi_p[p].transpose() * w));
      CHECK(close(pieces.P_Pps_w[p], ops.Pi * ops.Pi_p[p].transpose() * w));
      for (Index q = 0; q < P; ++q) CHECK(close(pieces.second(q, p), ops.Pi_qp[q][p] * ops.Pi * w));
    }
    INFO("M=" << M << " N=" << N << " P=" << P);
    const double gscale = std::max(1.0, w.squaredNorm());
    CHECK((gradient(pieces, w) - dense_gradient(ops, w)).cwiseAbs().maxCoeff() <= 1e-9 * gscale);
    CHECK((hessian(pieces, w) - dense_hessian(ops, w)).cwiseAbs().maxCoeff() <= 1e-9 * gscale);
  }
  CHECK(compared >= 40);
}

TEST_CASE("gradient matches central differences on the radar family") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto fam = four_pair_family(seed);
    std::mt19937_64 rng(seed + 100);
    Vec x(2);
    x << uniform(rng, -8, 8), uniform(rng, -8, 8);
    Vec w = 10 * random_vector(rng, 4);
    auto d = error_derivatives(fam, x, w);
    CHECK(rel_inf_error(d.gradient, fd_gradient(fam, x, w, 1e-5)) <= 1e-6);
  }
}

TEST_CASE("hessian matches differenced gradients on the radar family") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto fam = four_pair_family(seed);
    std::mt19937_64 rng(seed + 200);
    Vec x(2);
    x << uniform(rng, -8, 8), uniform(rng, -8, 8);
    Vec w = 10 * random_vector(rng, 4);
    auto d = error_derivatives(fam, x, w);
    CHECK(rel_inf_error(d.hessian, fd_hessian(fam, x, w, 1e-4)) <= 1e-4);
    CHECK(d.hessian == d.hessian.transpose());
    auto pieces = projector_pieces(fam.jet(x, 2), w);
    const double raw_qp = hessian_entry(pieces, w, 0, 1);
    const double raw_pq = hessian_entry(pieces, w, 1, 0);
    CHECK(std::abs(raw_qp - raw_pq) <= 1e-10 * std::max(1.0, std::abs(raw_qp)));
  }
}

TEST_CASE("zero residual: gradient vanishes and Hessian is the adjoint term") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto scene = random_scene(seed, 4);
    RadarFamily<double> fam(scene.geometry);
    const Vec& x = scene.truth.position;
    Vec w = fam.jet(x, 0).F().transpose() * scene.truth.velocity;
    auto pieces = projector_pieces(fam.jet(x, 2), w);
    CHECK(gradient(pieces, w).norm() <= 1e-12 * std::max(1.0, w.squaredNorm()));
    Mat H = hessian(pieces, w);
    Mat adjoint_only(2, 2);
    for (Index q = 0; q < 2; ++q)
      for (Index p = 0; p < 2; ++p) adjoint_only(q, p) = 2 * pieces.P_Pps_w[p].dot(pieces.P_Pps_w[q]);
    CHECK(rel_inf_error(H, adjoint_only) < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat> eig(H);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * H.norm());
  }
}

TEST_CASE("fd_gradient on a quadratic family and invalid steps") {
  std::mt19937_64 rng(8);
  auto fam = random_polynomial_family(rng, 2, 5, 3);
  Vec x = 0.1 * random_vector(rng, 3);
  Vec w = random_vector(rng, 5);
  auto d = error_derivatives(fam, x, w);
  CHECK(rel_inf_error(fd_gradient(fam, x, w), d.gradient) <= 1e-8);
  for (double bad : {0.0, -1e-3}) {
    try {
      fd_gradient(fam, x, w, bad);
      FAIL("expected InvalidStep");
    } catch (const FrameError& e) {
      CHECK(e.code() == ErrorCode::InvalidStep);
    }
  }
}
