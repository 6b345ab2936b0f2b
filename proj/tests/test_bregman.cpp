#include <doctest.h>

#include <sstream>

#include "hflow/bregman.hpp"
#include "hflow/errors.hpp"
#include "oracles.hpp"

using namespace hflow;

namespace {

ProductIterate positive_product(const Vector& x_tilde) {
  ProductIterate p;
  p.x_tilde = x_tilde;
  return p;
}

// One fixed-step gradient step of the reduced model, returned as products.
std::pair<ProductIterate, ProductIterate> one_step(const Problem& p, const Vector& x, int depth,
                                                   double eta) {
  const auto s = FactorState::positive(x, depth);
  const Vector next = x - eta * grad_reduced(p, s);
  return {s.product(), FactorState::positive(next, depth).product()};
}

}  // namespace

TEST_SUITE("bregman") {

TEST_CASE("potential examples") {
  CHECK(potential_value(Potential(2), Vector{{1.0}}) == -0.5);
  CHECK(potential_value(Potential(2), Vector{{0.0}}) == 0.0);
  CHECK(potential_value(Potential(4), Vector{{16.0}}) == -4.0);
  CHECK_THROWS_AS(Potential(1), ArgumentError);
  CHECK_THROWS_AS(potential_value(Potential(2), Vector{{-1.0}}), DomainError);

  const Vector g2 = potential_gradient(Potential(2), Vector{{1.0, std::exp(2.0)}});
  CHECK(g2(0) == 0.0);
  CHECK(g2(1) == doctest::Approx(1.0));
  CHECK(potential_gradient(Potential(4), Vector{{4.0}})(0) == doctest::Approx(-0.25));
}

TEST_CASE("bregman divergence examples") {
  oracle::Gen gen(1);
  for (int depth = 2; depth <= 5; ++depth) {
    const Vector w = gen.uniform_vector(5, 0.1, 3.0);
    CHECK(std::abs(bregman_divergence(Potential(depth), w, w)) <= 1e-15);
  }
  CHECK(bregman_divergence(Potential(2), Vector{{0.0}}, Vector{{1.0}}) == 0.5);
  CHECK_THROWS_AS(bregman_divergence(Potential(2), Vector{{1.0}}, Vector{{0.0}}), DomainError);
  CHECK_THROWS_AS(bregman_divergence(Potential(2), Vector{{-1.0}}, Vector{{1.0}}), DomainError);
}

TEST_CASE("closed form agrees with the definition") {
  oracle::Gen gen(2);
  for (int depth = 2; depth <= 5; ++depth) {
    for (int t = 0; t < 200; ++t) {
      const Vector z = gen.uniform_vector(4, 0.0, 3.0);
      const Vector x = gen.uniform_vector(4, 0.05, 3.0);
      const double want = oracle::bregman_from_definition(depth, z, x);
      const double got = bregman_divergence(Potential(depth), z, x);
      CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("bregman divergence is non-negative") {
  oracle::Gen gen(3);
  for (int depth = 2; depth <= 5; ++depth) {
    const Potential pot(depth);
    double worst = 0.0;
    for (int t = 0; t < 100000; ++t) {
      const double scale = std::pow(10.0, gen.uniform(-4.0, 2.0));
      const Vector z{{gen.uniform(0.0, 1.0) * scale}};
      const Vector x{{gen.uniform(1e-6, 1.0) * scale * std::pow(10.0, gen.uniform(-3.0, 3.0))}};
      worst = std::min(worst, bregman_divergence(pot, z, x));
    }
    CHECK(worst >= -1e-12);
  }
}

TEST_CASE("signed divergence is the sum of branch divergences") {
  oracle::Gen gen(4);
  for (int depth = 2; depth <= 4; ++depth) {
    const Potential pot(depth);
    const Vector z = gen.normal_vector(6);
    const Vector u = gen.uniform_vector(6, 0.1, 2.0);
    const Vector v = gen.uniform_vector(6, 0.1, 2.0);
    CHECK(bregman_divergence_signed(pot, z, u, v) ==
          bregman_divergence(pot, positive_part(z), u) + bregman_divergence(pot, negative_part(z), v));
  }
}

TEST_CASE("dissipation residual vanishes at a solution") {
  const Vector xt{{0.5, 2.0}};
  const Problem p(Matrix::Identity(2, 2), xt);
  const auto prod = positive_product(xt);
  CHECK(dissipation_residual(p, Potential(2), xt, prod, prod, 0.1) == 0.0);
}

TEST_CASE("dissipation residual matches the scalar expansion") {
  // A = [1], y = [1], L = 2, x~ = 4 (x = 2). Along the step x(eta) = 2 - 12 eta,
  // D(eta) = 1/2 [-2 log x - 1 + x^2] has D'(0) = -18 = -2 L loss and
  // D''(0) = 144 (1 / x^2 + 1) = 180, so the residual is 90 eta + O(eta^2).
  const Problem p(Matrix::Ones(1, 1), Vector::Ones(1));
  const double eta = 1e-6;
  const auto [before, after] = one_step(p, Vector{{2.0}}, 2, eta);
  const double r = dissipation_residual(p, Potential(2), Vector::Ones(1), before, after, eta);
  CHECK(std::abs(r) <= 100.0 * eta);
  CHECK(r == doctest::Approx(90.0 * eta).epsilon(0.05));
}

TEST_CASE("dissipation residual is first order in eta") {
  oracle::Gen gen(5);
  const Matrix a = gen.matrix(3, 6);
  const Vector z = gen.uniform_vector(6, 0.2, 1.0);
  const Problem p(a, a * z);
  const Vector x = gen.uniform_vector(6, 0.3, 1.0);
  for (int depth = 2; depth <= 3; ++depth) {
    const auto [b1, a1] = one_step(p, x, depth, 1e-4);
    const auto [b2, a2] = one_step(p, x, depth, 5e-5);
    const double r1 = dissipation_residual(p, Potential(depth), z, b1, a1, 1e-4);
    const double r2 = dissipation_residual(p, Potential(depth), z, b2, a2, 5e-5);
    CHECK(r1 / r2 == doctest::Approx(2.0).epsilon(0.2));
  }
}

TEST_CASE("dissipation residual rejects infeasible references") {
  const Problem p(Matrix::Identity(2, 2), Vector::Ones(2));
  const auto prod = positive_product(Vector::Ones(2));
  CHECK_THROWS_AS(dissipation_residual(p, Potential(2), Vector{{1.0, 2.0}}, prod, prod, 0.1),
                  InfeasibleReference);
  CHECK_THROWS_AS(check_reference(p, Vector{{1.0, 1.1}}), InfeasibleReference);
  CHECK_NOTHROW(check_reference(p, Vector{{1.0, 1.0 + 1e-10}}));
}

TEST_CASE("g_value examples") {
  oracle::Gen gen(6);
  const Vector x0 = gen.uniform_vector(5, 0.1, 2.0);
  CHECK(g_value(x0, x0, 2) == doctest::Approx(-x0.sum()).epsilon(1e-14));
  for (int depth = 3; depth <= 5; ++depth) {
    const double want = oracle::power(x0, 2.0 / depth).sum() * (1.0 - depth / 2.0);
    CHECK(g_value(x0, x0, depth) == doctest::Approx(want).epsilon(1e-13));
  }
  CHECK(g_value(x0, Vector::Zero(5), 2) == 0.0);
  CHECK_THROWS_AS(g_value(Vector{{0.0, 1.0}}, Vector::Ones(2), 2), DomainError);
}

TEST_CASE("g_tilde examples") {
  CHECK(g_tilde(1.5, 1.5, 2) == doctest::Approx(-1.5));
  CHECK(g_tilde(2.5, 2.5, 4) == doctest::Approx(-2.5));
  CHECK(std::abs(g_tilde(std::exp(1.0) * 0.7, 0.7, 2)) <= 1e-15);
  CHECK(g_tilde(0.0, 1.0, 2) == 0.0);
  CHECK_THROWS_AS(g_tilde(1.0, 0.0, 2), DomainError);
}

TEST_CASE("g_tilde is convex in its first argument") {
  for (int depth = 2; depth <= 5; ++depth) {
    for (double b : {0.01, 0.5, 3.0}) {
      const double h = 1e-3;
      for (double a = h; a < 5.0; a += 0.01) {
        const double second = g_tilde(a + h, b, depth) - 2.0 * g_tilde(a, b, depth) +
                              g_tilde(a - h, b, depth);
        REQUIRE(second >= -1e-10);
      }
    }
  }
}

TEST_CASE("g_tilde sandwiches g") {
  oracle::Gen gen(7);
  for (int depth = 2; depth <= 4; ++depth) {
    for (int t = 0; t < 2000; ++t) {
      const int n = gen.integer(1, 6);
      const Vector x = gen.uniform_vector(n, 1e-3, 2.0);
      Vector z = gen.uniform_vector(n, 0.0, 2.0);
      if (t % 3 == 0) z(0) = 0.0;
      const Vector w = oracle::power(x, 2.0 / depth - 1.0);
      const double a = weighted_l1(z, w);
      const double beta_1 = weighted_l1(x, w);
      const double beta_min = w.cwiseProduct(x).minCoeff();
      const double g = g_value(x, z, depth);
      REQUIRE(g_tilde(a, beta_1, depth) - 1e-12 <= g);
      REQUIRE(g <= g_tilde(a, beta_min, depth) + 1e-12);
    }
  }
}

TEST_CASE("solution entropy examples") {
  oracle::Gen gen(8);
  const Vector x = gen.uniform_vector(4, 0.2, 2.0);
  const Vector z = x.cwiseProduct(x);
  // Gradient x - z / x vanishes at x = sqrt(z).
  CHECK((x - z.cwiseQuotient(x)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(solution_entropy(Vector::Zero(4), x) == doctest::Approx(0.5 * x.squaredNorm()));
  // Differs from D_F(z, x^2) by a constant in x.
  const Vector x2 = gen.uniform_vector(4, 0.2, 2.0);
  const double c1 = solution_entropy(z, x) - bregman_divergence(Potential(2), z, x.cwiseProduct(x));
  const double c2 = solution_entropy(z, x2) - bregman_divergence(Potential(2), z, x2.cwiseProduct(x2));
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-12));
  CHECK_THROWS_AS(solution_entropy(z, Vector::Zero(4)), DomainError);
}

TEST_CASE("diagnostics csv layout") {
  FlowDiagnostics d;
  d.times = {0, 10};
  d.losses = {1.5, 0.25};
  d.reference_labels = {"xstar", "bp"};
  d.bregman_to_refs = {{2.0, 1.0}, {3.0, 2.5}};
  d.dissipation_residuals = {0.001, std::nan("")};
  d.product_norms = {0.1, 0.9};
  std::ostringstream os;
  write_diagnostics_csv(os, d);
  CHECK(os.str() ==
        "iter,loss,df_xstar,df_bp,dissipation_residual,product_l2\n"
        "0,1.5,2,3,0.001,0.1\n"
        "10,0.25,1,2.5,nan,0.9\n");
}

}
