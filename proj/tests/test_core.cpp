#include <doctest.h>

#include <set>

#include "hflow/core.hpp"
#include "hflow/errors.hpp"
#include "oracles.hpp"

using namespace hflow;

TEST_SUITE("core") {

TEST_CASE("hadamard_pow examples") {
  CHECK(hadamard_pow(Vector{{2.0, 3.0}}, 2.0) == Vector{{4.0, 9.0}});
  CHECK(hadamard_pow(Vector{{5.0, 7.0}}, 0.0) == Vector{{1.0, 1.0}});
  const Vector r = hadamard_pow(Vector{{4.0, 9.0}}, 0.5);
  CHECK(r(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r(1) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("hadamard_pow domain") {
  CHECK_THROWS_AS(hadamard_pow(Vector{{1.0, 0.0}}, 0.5), DomainError);
  CHECK_THROWS_AS(hadamard_pow(Vector{{-1.0, 2.0}}, -1.0), DomainError);
  CHECK(hadamard_pow(Vector{{-2.0}}, 3.0)(0) == -8.0);
  CHECK(hadamard_ipow(Vector{{-2.0, 0.5}}, 3) == Vector{{-8.0, 0.125}});
}

TEST_CASE("hadamard_pow composes") {
  oracle::Gen gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector x = gen.uniform_vector(6, 0.05, 4.0);
    const double a = gen.uniform(-2.0, 3.0);
    const double b = gen.uniform(-2.0, 3.0);
    const Vector lhs = hadamard_pow(hadamard_pow(x, a), b);
    const Vector rhs = hadamard_pow(x, a * b);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      CHECK(std::abs(lhs(i) - rhs(i)) <= 1e-12 * std::max(1.0, std::abs(rhs(i))));
    }
  }
}

TEST_CASE("rng determinism and ranges") {
  Rng a(42, 7);
  Rng b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(3, 0);
  for (int i = 0; i < 1000; ++i) CHECK(c.uniform_below(7) < 7);
  CHECK_THROWS_AS(c.uniform_below(0), ArgumentError);

  // split does not advance the parent and is reproducible.
  Rng parent(5, 1);
  Rng s1 = parent.split(9);
  Rng s2 = parent.split(9);
  CHECK(s1.next_u64() == s2.next_u64());
  Rng fresh(5, 1);
  CHECK(parent.next_u64() == fresh.next_u64());
}

TEST_CASE("rng normal moments") {
  Rng r(2024, 0);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("distinct streams never collide") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng a(seed, 0);
    Rng b(seed, 1);
    bool identical = true;
    for (int i = 0; i < 100; ++i) identical = identical && (a.next_u64() == b.next_u64());
    CHECK_FALSE(identical);
  }
}

TEST_CASE("gaussian_sensing_matrix statistics") {
  Rng rng(1, 0);
  const int m = 20;
  const int n = 20;
  const Matrix a = gaussian_sensing_matrix(m, n, rng);
  const double mean_sq = a.squaredNorm() / (m * n);
  // entry^2 = W^2 / m with Var(W^2) = 2.
  const double sigma = std::sqrt(2.0 / (m * n)) / m;
  CHECK(std::abs(mean_sq - 1.0 / m) <= 3.0 * sigma);
  const double col_mean = a.colwise().squaredNorm().mean();
  CHECK(std::abs(col_mean - 1.0) <= 3.0 * std::sqrt(2.0 / (m * n)));
}

TEST_CASE("gaussian_sensing_matrix 1x1 and determinism") {
  Rng r1(77, 3);
  Rng r2(77, 3);
  const Matrix a = gaussian_sensing_matrix(1, 1, r1);
  CHECK(a(0, 0) == r2.normal());

  Rng r3(9, 9);
  Rng r4(9, 9);
  CHECK(gaussian_sensing_matrix(5, 8, r3) == gaussian_sensing_matrix(5, 8, r4));
  CHECK_THROWS_AS(gaussian_sensing_matrix(0, 3, r3), ArgumentError);
}

TEST_CASE("sparse_ground_truth examples") {
  Rng rng(4, 0);
  const GroundTruth g = sparse_ground_truth(20, 3, false, rng);
  int nnz = 0;
  for (Eigen::Index i = 0; i < 20; ++i) {
    if (g.x_star(i) != 0.0) {
      ++nnz;
      CHECK(g.x_star(i) > 0.0);
    }
  }
  CHECK(nnz == 3);
  CHECK(g.sparsity() == 3);
  CHECK(std::abs(g.x_star.norm() - 1.0) <= 1e-12);

  const GroundTruth dense = sparse_ground_truth(5, 5, true, rng);
  CHECK((dense.x_star.array() != 0.0).all());
  CHECK(std::abs(dense.x_star.norm() - 1.0) <= 1e-12);

  const GroundTruth one = sparse_ground_truth(20, 1, true, rng);
  CHECK(std::abs(one.x_star.cwiseAbs().maxCoeff() - 1.0) <= 1e-15);

  CHECK_THROWS_AS(sparse_ground_truth(5, 6, false, rng), ArgumentError);
  CHECK_THROWS_AS(sparse_ground_truth(5, 0, false, rng), ArgumentError);
}

TEST_CASE("sparse_ground_truth support size over many trials") {
  std::vector<int> hits(10, 0);
  for (std::uint64_t t = 0; t < 10000; ++t) {
    Rng rng(t, 17);
    const GroundTruth g = sparse_ground_truth(10, 3, t % 2 == 0, rng);
    REQUIRE(g.support.size() == 3);
    REQUIRE(std::set<Eigen::Index>(g.support.begin(), g.support.end()).size() == 3);
    int nnz = 0;
    for (Eigen::Index i = 0; i < 10; ++i) nnz += g.x_star(i) != 0.0;
    REQUIRE(nnz == 3);
    REQUIRE(std::abs(g.x_star.norm() - 1.0) <= 1e-12);
    for (auto i : g.support) ++hits[static_cast<std::size_t>(i)];
  }
  // Uniform support: each index appears in 3/10 of draws.
  for (int h : hits) CHECK(std::abs(h - 3000) < 4.0 * std::sqrt(10000 * 0.3 * 0.7));
}

TEST_CASE("weighted l1 examples") {
  CHECK(weighted_l1(Vector{{1.0, -2.0, 3.0}}, Vector::Ones(3)) == 6.0);
  CHECK(weighted_l1(Vector{{1.0, -2.0}}, Vector{{0.0, 5.0}}) == 10.0);
  CHECK(weighted_l1(Vector::Zero(4), Vector{{1.0, 2.0, 3.0, 4.0}}) == 0.0);
  CHECK_THROWS_AS(weighted_l1(Vector::Zero(2), Vector::Ones(3)), ArgumentError);

  CHECK(signed_weighted_l1(Vector{{2.0, -3.0}}, Vector::Ones(2), Vector::Ones(2)) == 5.0);
  CHECK(signed_weighted_l1(Vector{{2.0, -3.0}}, Vector::Constant(2, 10.0), Vector::Ones(2)) == 23.0);
  CHECK(signed_weighted_l1(Vector{{-1.0, -1.0}}, Vector::Constant(2, 99.0), Vector::Zero(2)) == 0.0);
  CHECK_THROWS_AS(signed_weighted_l1(Vector::Zero(2), Vector::Ones(2), Vector::Ones(1)),
                  ArgumentError);
}

TEST_CASE("signed weighted l1 with equal weights is weighted l1 exactly") {
  oracle::Gen gen(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = gen.integer(1, 12);
    Vector z = gen.normal_vector(n);
    for (int i = 0; i < n; ++i) {
      if (gen.uniform(0.0, 1.0) < 0.3) z(i) = 0.0;
    }
    const Vector w = gen.uniform_vector(n, 0.0, 5.0);
    REQUIRE(signed_weighted_l1(z, w, w) == weighted_l1(z, w));
  }
}

TEST_CASE("positive and negative parts") {
  const Vector z{{2.0, -3.0, 0.0}};
  CHECK(positive_part(z) == Vector{{2.0, 0.0, 0.0}});
  CHECK(negative_part(z) == Vector{{0.0, 3.0, 0.0}});
  CHECK(positive_part(z) - negative_part(z) == z);
}

TEST_CASE("problem validation") {
  CHECK_THROWS_AS(Problem(Matrix(2, 3), Vector::Zero(3)), ArgumentError);
  Matrix a = Matrix::Zero(1, 2);
  a(0, 0) = std::nan("");
  CHECK_THROWS_AS(Problem(a, Vector::Zero(1)), ArgumentError);
  const Problem p(Matrix::Identity(2, 2), Vector::Ones(2));
  CHECK(p.rows() == 2);
  CHECK(p.cols() == 2);
  CHECK(p.with_measurements(Vector::Zero(2)).measurements() == Vector::Zero(2));
}

}
