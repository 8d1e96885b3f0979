#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "spherecl/metrics.hpp"
#include "util.hpp"

using namespace spherecl;

namespace {

EmbeddingBatch repeated_point(int m, int d) {
  Matrix pts = Matrix::Zero(m, d);
  pts.col(0).setOnes();
  return EmbeddingBatch(pts);
}

Matrix random_rotation(int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Matrix raw(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) raw(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(raw);
  return Matrix(qr.householderQ());
}

}  // namespace

TEST_CASE("alignment matches hand values") {
  auto batch = testutil::random_batch(5, 4, 1);
  CHECK(metric_alignment(batch, batch) == 0.0);

  Matrix u1(1, 2), v1(1, 2);
  u1 << 1, 0;
  v1 << -1, 0;
  CHECK(metric_alignment(EmbeddingBatch(u1), EmbeddingBatch(v1)) == 4.0);

  Matrix u2(2, 2), v2(2, 2);
  u2 << 1, 0, 1, 0;
  v2 << 0, 1, 1, 0;
  CHECK(metric_alignment(EmbeddingBatch(u2), EmbeddingBatch(v2)) == 1.0);
  CHECK_THROWS_AS(
      metric_alignment(batch, testutil::random_batch(5, 3, 2)),
      DimensionMismatch);
}

TEST_CASE("alignment is invariant under a common rotation") {
  auto u = testutil::random_batch(6, 5, 3);
  auto v = testutil::random_batch(6, 5, 4);
  Matrix q = random_rotation(5, 9);
  auto ur = EmbeddingBatch(Matrix(u.points() * q));
  auto vr = EmbeddingBatch(Matrix(v.points() * q));
  CHECK(metric_alignment(ur, vr) ==
        doctest::Approx(metric_alignment(u, v)).epsilon(1e-12));
}

TEST_CASE("uniformity matches hand values and its lower bound") {
  CHECK(metric_uniformity(repeated_point(3, 2), 2.0) == 0.0);

  Matrix pair(2, 2);
  pair << 1, 0, -1, 0;
  CHECK(metric_uniformity(EmbeddingBatch(pair), 2.0) ==
        doctest::Approx(-8.0).epsilon(1e-13));

  Matrix tri(3, 2);
  const double s = std::sqrt(3.0) / 2.0;
  tri << 1, 0, -0.5, s, -0.5, -s;
  CHECK(metric_uniformity(EmbeddingBatch(tri), 2.0) ==
        doctest::Approx(-6.0).epsilon(1e-13));

  for (unsigned seed = 0; seed < 5; ++seed) {
    for (double t : {0.5, 2.0, 5.0}) {
      CHECK(metric_uniformity(testutil::random_batch(8, 3, seed), t) >=
            -4.0 * t);
    }
  }

  CHECK_THROWS_AS(metric_uniformity(repeated_point(1, 2), 2.0), ArityError);
  CHECK_THROWS_AS(metric_uniformity(repeated_point(3, 2), 0.0), SpecError);
}

TEST_CASE("1-D Wasserstein distance on hand-sized samples") {
  CHECK(wasserstein_distance_1d({0.0, 1.0}, {0.0, 1.0}) == 0.0);
  // Point masses at 0 and 1: mass must travel distance 1.
  CHECK(wasserstein_distance_1d({0.0}, {1.0}) == doctest::Approx(1.0));
  // {0,1} vs {0.5}: each half moves 0.5.
  CHECK(wasserstein_distance_1d({0.0, 1.0}, {0.5, 0.5}) ==
        doctest::Approx(0.5));
  // Different sizes: {0,1} vs {1}: half the mass moves 1.
  CHECK(wasserstein_distance_1d({0.0, 1.0}, {1.0}) == doctest::Approx(0.5));
}

TEST_CASE("reference sampler reproduces the similarity law moments") {
  std::mt19937_64 rng(123);
  // Mean 0 and variance 1/d for uniform sphere inner products.
  for (int d : {2, 4, 16}) {
    auto s = sample_similarity_reference(d, 200000, rng);
    double mean = 0.0, sq = 0.0;
    for (double v : s) {
      mean += v;
      sq += v * v;
    }
    mean /= s.size();
    sq /= s.size();
    CHECK(std::abs(mean) < 0.01);
    CHECK(sq == doctest::Approx(1.0 / d).epsilon(0.05));
  }
}

TEST_CASE("reference vs reference with the same seed is exactly zero") {
  std::mt19937_64 rng_a(7), rng_b(7);
  auto a = sample_similarity_reference(8, 5000, rng_a);
  auto b = sample_similarity_reference(8, 5000, rng_b);
  CHECK(wasserstein_distance_1d(a, b) == 0.0);
}

TEST_CASE("uniform batches sit close to the similarity law") {
  auto batch = testutil::random_batch(2048, 16, 99);
  std::mt19937_64 rng(100);
  CHECK(metric_wasserstein_similarity(batch, 100000, rng) < 0.02);
}

TEST_CASE("a collapsed batch in d=2 sits distance one from the arcsine law") {
  auto batch = repeated_point(32, 2);
  std::mt19937_64 rng(101);
  const double w = metric_wasserstein_similarity(batch, 100000, rng);
  CHECK(w == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("wasserstein metric is invariant under rotations of U") {
  auto u = testutil::random_batch(64, 6, 55);
  Matrix q = random_rotation(6, 56);
  auto ur = EmbeddingBatch(Matrix(u.points() * q));
  std::mt19937_64 rng_a(57), rng_b(57);
  const double w = metric_wasserstein_similarity(u, 20000, rng_a);
  const double wr = metric_wasserstein_similarity(ur, 20000, rng_b);
  CHECK(w == doctest::Approx(wr).epsilon(1e-10));
}

TEST_CASE("rank counts singular values above threshold") {
  CHECK(metric_rank(EmbeddingBatch(Matrix::Identity(4, 4))) == 4);
  CHECK(metric_rank(regular_simplex(4, 8)) == 3);
  CHECK(metric_rank(repeated_point(5, 3)) == 1);
  for (int m : {2, 3, 5}) {
    CHECK(metric_rank(regular_simplex(m, 8)) == m - 1);
  }
}

TEST_CASE("effective rank is the spectrum entropy") {
  CHECK(metric_effective_rank(EmbeddingBatch(Matrix::Identity(4, 4))) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-5));
  CHECK(metric_effective_rank(repeated_point(4, 3)) ==
        doctest::Approx(0.0).epsilon(1e-4));
  for (unsigned seed = 0; seed < 5; ++seed) {
    for (int m : {3, 6}) {
      for (int d : {4, 8}) {
        auto batch = testutil::random_batch(m, d, 500 + seed);
        CHECK(metric_effective_rank(batch) <=
              std::log(static_cast<double>(std::min(m, d))) + 1e-6);
      }
    }
  }
}

TEST_CASE("hemisphere collapse raises uniformity and wasserstein") {
  for (int d : {4, 16}) {
    for (unsigned seed = 0; seed < 5; ++seed) {
      auto uniform = testutil::random_batch(512, d, 700 + seed);
      Matrix folded = uniform.points();
      folded.col(0) = folded.col(0).cwiseAbs();
      auto hemisphere = EmbeddingBatch(folded);

      CHECK(metric_uniformity(uniform, 2.0) <
            metric_uniformity(hemisphere, 2.0));

      std::mt19937_64 rng_a(800 + seed), rng_b(800 + seed);
      CHECK(metric_wasserstein_similarity(uniform, 20000, rng_a) <
            metric_wasserstein_similarity(hemisphere, 20000, rng_b));
    }
  }
}

TEST_CASE("compute_metrics assembles a consistent report") {
  auto u = testutil::random_batch(32, 6, 61);
  auto v = testutil::random_batch(32, 6, 62);
  auto report = compute_metrics(u, v, 2.0, 5000, 63);
  CHECK(report.alignment == doctest::Approx(metric_alignment(u, v)));
  CHECK(report.uniformity == doctest::Approx(metric_uniformity(u, 2.0)));
  CHECK(report.rank <= 6);
  CHECK(report.effective_rank <= std::log(6.0) + 1e-6);
  CHECK(report.t == 2.0);
  CHECK(report.n_ref == 5000);
  CHECK(report.seed == 63);

  // Same seed, same numbers: the report is a pure function of its inputs.
  auto repeat = compute_metrics(u, v, 2.0, 5000, 63);
  CHECK(repeat.wasserstein == report.wasserstein);
}
