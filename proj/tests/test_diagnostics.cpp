#include <doctest.h>

#include <set>

#include "support.hpp"

using namespace framefit;
using namespace framefit::testing;

TEST_CASE("residual bound without noise") {
  auto scene = random_scene(1, 4);
  RadarFamily<double> fam(scene.geometry);
  Vec w = simulate_fdoa(scene.geometry, scene.truth, {});
  auto r = residual_bound_check(fam, scene.truth.position, w, 0.0);
  CHECK(r.holds);
  CHECK(r.value_at_truth <= 1e-18 * w.squaredNorm());
}

TEST_CASE("residual bound is an equality for null-space noise") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto scene = random_scene(seed, 6);
    RadarFamily<double> fam(scene.geometry);
    const Vec clean = simulate_fdoa(scene.geometry, scene.truth, {});
    const Mat F = fam.jet(scene.truth.position, 0).F();
    std::mt19937_64 rng(seed);
    // Null-space vector from a complete orthogonal basis of R^N, not from the
    // library projector.
    Eigen::HouseholderQR<Mat> qr(F.transpose());
    const Mat Q = qr.householderQ();
    Vec eps = Q.rightCols(F.cols() - F.rows()) * random_vector(rng, F.cols() - F.rows());
    eps *= 0.3 / eps.norm();
    auto r = residual_bound_check(fam, scene.truth.position, (clean + eps).eval(), eps.norm());
    CHECK(r.holds);
    CHECK(std::abs(r.value_at_truth - r.bound) <= 1e-10 * r.bound);
  }
}

TEST_CASE("residual bound holds for gaussian noise") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto scene = random_scene(seed, 5);
    RadarFamily<double> fam(scene.geometry);
    const Vec clean = simulate_fdoa(scene.geometry, scene.truth, {});
    const Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.2, seed});
    CHECK(residual_bound_check(fam, scene.truth.position, w, (w - clean).norm()).holds);
  }
}

TEST_CASE("level set at the full measurement norm covers every point") {
  auto scene = random_scene(2, 4);
  RadarFamily<double> fam(scene.geometry);
  Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.5, 2});
  auto grid = square_grid(2, -10, 10, 15);
  auto report = level_set(fam, w, grid, w.squaredNorm());
  CHECK(report.fraction == 1.0);
  CHECK(static_cast<Index>(report.points.size()) == report.in_domain);
  auto empty = level_set(fam, w, grid, 0.0);
  for (const auto& p : empty.points) CHECK(p.value <= empty.allowance);
}

TEST_CASE("level sets are nested in the threshold") {
  auto scene = random_scene(3, 4);
  RadarFamily<double> fam(scene.geometry);
  Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.5, 3});
  auto grid = square_grid(2, -10, 10, 15);
  double previous_fraction = 0;
  std::set<std::pair<double, double>> previous;
  for (double tau : {0.0, 0.01, 0.1, 1.0, 10.0}) {
    auto report = level_set(fam, w, grid, tau);
    std::set<std::pair<double, double>> current;
    for (const auto& p : report.points) {
      CHECK(p.value <= tau + report.allowance);
      current.insert({p.x(0), p.x(1)});
    }
    for (const auto& xy : previous) CHECK(current.count(xy) == 1);
    CHECK(report.fraction >= previous_fraction);
    CHECK(report.fraction == doctest::Approx(double(report.points.size()) / double(report.in_domain)));
    previous = std::move(current);
    previous_fraction = report.fraction;
  }
}

TEST_CASE("square scenes are degenerate: E vanishes on the whole grid") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto scene = random_scene(seed, 2);
    RadarFamily<double> fam(scene.geometry);
    Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.5, seed});
    auto grid = square_grid(2, -10, 10, 21);
    auto scan = grid_scan(fam, w, grid);
    CHECK(scan.max_value <= 1e-18 * w.squaredNorm());
    auto report = level_set(fam, w, grid, 0.0);
    CHECK(report.fraction == 1.0);
  }
}

TEST_CASE("augmented vectors match direct assembly and differenced frame elements") {
  const double h = 1e-6;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto scene = random_scene(seed, 4);
    RadarFamily<double> fam(scene.geometry);
    const Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.3, seed});
    const Vec& x = scene.truth.position;
    const Mat A = augmented_vectors(fam, x, w);
    const Mat F = fam.jet(x, 0).F();
    const Vec coeffs = (F * F.transpose()).ldlt().solve(F * w);
    CHECK(A.topRows(2) == F);
    for (Index n = 0; n < 4; ++n) {
      Mat jac(2, 2);
      for (Index p = 0; p < 2; ++p) {
        Vec plus = x, minus = x;
        plus(p) += h;
        minus(p) -= h;
        jac.col(p) = (frame_element(scene.geometry, n, plus) - frame_element(scene.geometry, n, minus)) / (2 * h);
      }
      const Vec want = jac.transpose() * coeffs;
      CHECK(rel_inf_error(A.col(n).tail(2), want) <= 1e-5);
    }
    CHECK(singular_values<double>(A).minCoeff() > 0);
  }
}

TEST_CASE("augmented vectors degenerate for constant families and zero data") {
  std::mt19937_64 rng(4);
  PolynomialFamily<double> constant(random_matrix(rng, 2, 6), 2);
  const Vec x = random_vector(rng, 2);
  const Mat A = augmented_vectors(constant, x, random_vector(rng, 6));
  CHECK(A.bottomRows(2).norm() == 0.0);
  auto cert = uniqueness_certificate(constant, random_vector(rng, 6), {x});
  CHECK_FALSE(cert.pass);

  auto scene = random_scene(5, 4);
  RadarFamily<double> fam(scene.geometry);
  CHECK(augmented_vectors(fam, scene.truth.position, Vec::Zero(4)).bottomRows(2).norm() == 0.0);
}

TEST_CASE("uniqueness certificate fails with too few vectors") {
  for (Index pairs : {2, 3}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto scene = random_scene(seed, pairs);
      RadarFamily<double> fam(scene.geometry);
      const Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.1, seed});
      std::vector<Vec> samples{scene.truth.position, (scene.truth.position + Vec::Constant(2, 0.5)).eval()};
      auto cert = uniqueness_certificate(fam, w, samples, 1e-12);
      CHECK_FALSE(cert.pass);
      REQUIRE(cert.smallest_singular_values.size() == 2);
      for (double s : cert.smallest_singular_values) CHECK(s == 0.0);
    }
  }
}

TEST_CASE("uniqueness certificate passes near the truth for generic 2M scenes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto scene = random_scene(seed, 4);
    RadarFamily<double> fam(scene.geometry);
    const Vec w = simulate_fdoa(scene.geometry, scene.truth, {});
    std::mt19937_64 rng(seed);
    std::vector<Vec> samples;
    for (int k = 0; k < 25; ++k) samples.push_back(scene.truth.position + 0.5 * random_vector(rng, 2));
    auto cert = uniqueness_certificate(fam, w, samples, 1e-6);
    CHECK(cert.pass);
    CHECK(cert.samples.size() == 25);
  }
}

TEST_CASE("uniqueness certificate names a sample outside the domain") {
  auto scene = random_scene(6, 4);
  RadarFamily<double> fam(scene.geometry);
  const Vec w = simulate_fdoa(scene.geometry, scene.truth, {});
  try {
    uniqueness_certificate(fam, w, {Vec(scene.geometry.receivers.col(1))});
    FAIL("expected RankDeficient");
  } catch (const FrameError& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
    CHECK(std::string(e.what()).find('(') != std::string::npos);
  }
}

TEST_CASE("scaling the measurement scales E and keeps the grid argmin") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto scene = random_scene(seed, 4);
    RadarFamily<double> fam(scene.geometry);
    const Vec w = simulate_fdoa(scene.geometry, scene.truth, {0.5, seed});
    auto grid = square_grid(2, -10, 10, 21);
    const auto base = grid_scan(fam, w, grid);
    for (double c : {0.25, 3.0, 1000.0}) {
      const Vec cw = c * w;
      const auto scaled = grid_scan(fam, cw, grid);
      CHECK(scaled.best_index == base.best_index);
      CHECK(scaled.best_value == doctest::Approx(c * c * base.best_value).epsilon(1e-10));
      const Vec x = grid.point(17);
      if (fam.contains(x)) {
        CHECK(error_value(fam, x, cw) == doctest::Approx(c * c * error_value(fam, x, w)).epsilon(1e-10));
      }
    }
  }
}
