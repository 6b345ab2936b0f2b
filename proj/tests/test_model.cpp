#include <doctest.h>

#include "hflow/errors.hpp"
#include "hflow/model.hpp"
#include "oracles.hpp"

using namespace hflow;

namespace {

Problem random_problem(oracle::Gen& gen, int m, int n) {
  return Problem(gen.matrix(m, n), gen.normal_vector(m));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("loss_quadratic examples") {
  const Problem p(Matrix::Identity(2, 2), Vector{{1.0, 0.0}});
  CHECK(loss_quadratic(p, Vector{{1.0, 0.0}}) == 0.0);
  const Problem q(Matrix::Identity(2, 2), Vector::Zero(2));
  CHECK(loss_quadratic(q, Vector{{3.0, 4.0}}) == 12.5);
  CHECK_THROWS_AS(loss_quadratic(q, Vector::Zero(3)), ArgumentError);

  oracle::Gen gen(1);
  for (int t = 0; t < 20; ++t) {
    const Problem r = random_problem(gen, 4, 8);
    const Vector x = gen.normal_vector(8);
    const double want = oracle::loss(r.matrix(), r.measurements(), x);
    CHECK(std::abs(loss_quadratic(r, x) - want) <= 1e-12 * std::max(1.0, want));
  }
}

TEST_CASE("loss_reduced examples") {
  oracle::Gen gen(2);
  const Matrix a = gen.matrix(3, 6);
  const Vector z = gen.uniform_vector(6, 0.1, 2.0);
  const Problem p(a, a * z);
  const auto s = FactorState::positive(oracle::power(z, 0.5), 2);
  CHECK(loss_reduced(p, s) <= 1e-28);

  const Problem zero(Matrix::Zero(2, 3), Vector::Zero(2));
  CHECK(loss_reduced(zero, FactorState::uniform_positive(3, 1.0, 3)) == 0.0);

  for (int depth = 2; depth <= 5; ++depth) {
    const Problem r = random_problem(gen, 4, 7);
    const auto st = FactorState::positive(gen.uniform_vector(7, 0.2, 1.5), depth);
    CHECK(loss_reduced(r, st) == loss_quadratic(r, hadamard_pow(st.x(), depth)));
  }
  CHECK_THROWS_AS(loss_reduced(p, FactorState::uniform_signed(6, 0.5, 2)), ModelMismatch);
}

TEST_CASE("grad_reduced examples") {
  oracle::Gen gen(3);
  const Matrix a = gen.matrix(3, 6);
  const Vector x = gen.uniform_vector(6, 0.3, 1.2);
  const Problem exact(a, a * hadamard_pow(x, 3));
  const Vector g = grad_reduced(exact, FactorState::positive(x, 3));
  CHECK(g.cwiseAbs().maxCoeff() <= 1e-14);

  const Problem p = random_problem(gen, 3, 6);
  auto st = FactorState::positive(gen.uniform_vector(6, 0.3, 1.2), 2);
  st.first()(2) = 0.0;
  CHECK(grad_reduced(p, st)(2) == 0.0);

  const auto s3 = FactorState::positive(gen.uniform_vector(6, 0.3, 1.2), 3);
  const Vector fd = oracle::finite_difference(
      [&](const Vector& v) { return oracle::loss(p.matrix(), p.measurements(), oracle::power(v, 3)); },
      s3.x());
  CHECK(oracle::rel_err(grad_reduced(p, s3), fd) <= 1e-5);
  CHECK_THROWS_AS(grad_reduced(p, FactorState::uniform_signed(6, 0.5, 2)), ModelMismatch);
}

TEST_CASE("loss_signed examples") {
  oracle::Gen gen(4);
  const Matrix a = gen.matrix(3, 5);
  const Vector u = gen.uniform_vector(5, 0.2, 1.0);
  const Problem zero_y(a, Vector::Zero(3));
  CHECK(loss_signed(zero_y, FactorState::signed_pair(u, u, 3)) == 0.0);

  const Vector v = gen.uniform_vector(5, 0.2, 1.0);
  const Problem exact(a, a * (hadamard_pow(u, 2) - hadamard_pow(v, 2)));
  CHECK(loss_signed(exact, FactorState::signed_pair(u, v, 2)) <= 1e-28);

  const Problem r = random_problem(gen, 3, 5);
  const auto st = FactorState::signed_pair(u, v, 4);
  CHECK(loss_signed(r, st) == loss_quadratic(r, hadamard_pow(u, 4) - hadamard_pow(v, 4)));
  CHECK_THROWS_AS(loss_signed(r, FactorState::uniform_positive(5, 0.5, 2)), ModelMismatch);
}

TEST_CASE("grad_signed examples") {
  oracle::Gen gen(5);
  const Matrix a = gen.matrix(4, 8);
  const Vector u = gen.uniform_vector(8, 0.2, 1.0);
  const Vector v = gen.uniform_vector(8, 0.2, 1.0);
  const Problem exact(a, a * (hadamard_pow(u, 3) - hadamard_pow(v, 3)));
  const auto [gu0, gv0] = grad_signed(exact, FactorState::signed_pair(u, v, 3));
  CHECK(gu0.cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(gv0.cwiseAbs().maxCoeff() <= 1e-14);

  // Swapping u and v flips the sign of the product; negating y restores the residual.
  const Problem p = random_problem(gen, 4, 8);
  const Problem neg = p.with_measurements(-p.measurements());
  const auto [gu, gv] = grad_signed(p, FactorState::signed_pair(u, v, 2));
  const auto [hu, hv] = grad_signed(neg, FactorState::signed_pair(v, u, 2));
  CHECK(gu == hv);
  CHECK(gv == hu);

  const Vector fdu = oracle::finite_difference(
      [&](const Vector& w) {
        return oracle::loss(p.matrix(), p.measurements(), oracle::power(w, 2) - oracle::power(v, 2));
      },
      u);
  const Vector fdv = oracle::finite_difference(
      [&](const Vector& w) {
        return oracle::loss(p.matrix(), p.measurements(), oracle::power(u, 2) - oracle::power(w, 2));
      },
      v);
  CHECK(oracle::rel_err(gu, fdu) <= 1e-5);
  CHECK(oracle::rel_err(gv, fdv) <= 1e-5);
}

TEST_CASE("grad_over_factor examples") {
  oracle::Gen gen(6);
  const Problem p = random_problem(gen, 3, 6);
  const Vector x = gen.uniform_vector(6, 0.3, 1.3);
  for (int depth = 2; depth <= 5; ++depth) {
    const std::vector<Vector> factors(static_cast<std::size_t>(depth), x);
    const Vector reduced = grad_reduced(p, FactorState::positive(x, depth));
    const Vector first = grad_over_factor(p, factors, 0);
    for (std::size_t k = 1; k < factors.size(); ++k) CHECK(grad_over_factor(p, factors, k) == first);
    CHECK(static_cast<double>(depth) * first == reduced);
  }

  const Matrix a = gen.matrix(3, 6);
  const std::vector<Vector> fs{gen.uniform_vector(6, 0.3, 1.3), gen.uniform_vector(6, 0.3, 1.3),
                               gen.uniform_vector(6, 0.3, 1.3)};
  const Problem exact(a, a * fs[0].cwiseProduct(fs[1]).cwiseProduct(fs[2]));
  CHECK(grad_over_factor(exact, fs, 1).cwiseAbs().maxCoeff() <= 1e-14);

  for (std::size_t k = 0; k < 3; ++k) {
    const Vector fd = oracle::finite_difference(
        [&](const Vector& w) {
          auto copy = fs;
          copy[k] = w;
          return loss_over(p, copy);
        },
        fs[k]);
    CHECK(oracle::rel_err(grad_over_factor(p, fs, k), fd) <= 1e-5);
  }
  CHECK_THROWS_AS(grad_over_factor(p, fs, 3), IndexError);
  CHECK_THROWS_AS(grad_over_factor(p, {x}, 0), ArgumentError);
}

TEST_CASE("losses are non-negative and the origin is stationary") {
  oracle::Gen gen(7);
  for (int t = 0; t < 100; ++t) {
    const int depth = gen.integer(2, 5);
    const Problem p = random_problem(gen, 3, 7);
    const Vector x = gen.uniform_vector(7, 0.01, 2.0);
    const Vector v = gen.uniform_vector(7, 0.01, 2.0);
    CHECK(loss_quadratic(p, gen.normal_vector(7)) >= 0.0);
    CHECK(loss_reduced(p, FactorState::positive(x, depth)) >= 0.0);
    CHECK(loss_signed(p, FactorState::signed_pair(x, v, depth)) >= 0.0);
    CHECK(loss_over(p, {x, v, x}) >= 0.0);

    auto origin = FactorState::positive(x, depth);
    origin.first().setZero();
    CHECK(grad_reduced(p, origin) == Vector::Zero(7));
  }
}

TEST_CASE("evaluate matches the separate functions") {
  oracle::Gen gen(8);
  const Problem p = random_problem(gen, 4, 9);
  const auto pos = FactorState::positive(gen.uniform_vector(9, 0.1, 1.0), 3);
  const GradientEval e = evaluate(p, pos);
  CHECK(e.loss == loss(p, pos));
  CHECK(e.grad_first == grad_reduced(p, pos));
  CHECK(e.x_tilde == pos.product().x_tilde);

  const auto sig = FactorState::signed_pair(gen.uniform_vector(9, 0.1, 1.0),
                                            gen.uniform_vector(9, 0.1, 1.0), 4);
  const GradientEval es = evaluate(p, sig);
  const auto [gu, gv] = grad_signed(p, sig);
  CHECK(es.loss == loss(p, sig));
  CHECK(es.grad_first == gu);
  CHECK(es.grad_second == gv);
}

TEST_CASE("factor state validation") {
  CHECK_THROWS_AS(FactorState::positive(Vector{{1.0, 0.0}}, 2), DomainError);
  CHECK_THROWS_AS(FactorState::signed_pair(Vector::Ones(2), Vector::Ones(3), 2), ArgumentError);
  CHECK_THROWS_AS(FactorState::uniform_positive(3, 0.5, 0), ArgumentError);
  const auto s = FactorState::uniform_signed(3, 0.5, 2);
  CHECK_THROWS_AS(s.x(), ModelMismatch);
  CHECK(s.product().x_tilde == Vector::Zero(3));
  CHECK(s.product().u_tilde == Vector::Constant(3, 0.25));
}

}
