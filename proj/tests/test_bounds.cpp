#include <doctest.h>

#include <json.hpp>

#include "hflow/bounds.hpp"
#include "hflow/errors.hpp"
#include "oracles.hpp"

using namespace hflow;

TEST_SUITE("bounds") {

TEST_CASE("make_weights examples") {
  oracle::Gen gen(1);
  const Vector u = gen.uniform_vector(5, 0.1, 2.0);
  const Vector v = gen.uniform_vector(5, 0.1, 2.0);
  const WeightSpec w2 = make_weights(u, v, 2);
  CHECK(w2.gamma == 0.0);
  CHECK(w2.w_plus == Vector::Ones(5));
  CHECK(w2.w_minus == Vector::Ones(5));

  const double alpha = 0.3;
  const Vector init = Vector::Constant(4, std::pow(alpha, 4));
  const WeightSpec w4 = make_weights(init, init, 4);
  CHECK(w4.gamma == 0.5);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(w4.w_plus(i) == doctest::Approx(std::pow(alpha, -2.0)).epsilon(1e-14));
  }

  const Vector z = gen.normal_vector(4);
  CHECK(signed_weighted_l1(z, w4.w_plus, w4.w_minus) ==
        doctest::Approx(std::pow(alpha, -2.0) * z.lpNorm<1>()).epsilon(1e-14));

  CHECK_THROWS_AS(make_weights(Vector{{0.0}}, Vector{{1.0}}, 3), DomainError);
  CHECK_THROWS_AS(make_weights(Vector{{1.0}}, Vector{{1.0}}, 1), ArgumentError);
  CHECK(make_weights_positive(init, 4).w_minus == make_weights_positive(init, 4).w_plus);
}

TEST_CASE("beta_stats examples") {
  const int n = 7;
  const double alpha = 0.2;
  for (int depth = 2; depth <= 5; ++depth) {
    const Vector init = Vector::Constant(n, std::pow(alpha, depth));
    const BetaStats b = beta_stats(init, init, make_weights(init, init, depth));
    CHECK(b.beta_1 == doctest::Approx(2.0 * n * alpha * alpha).epsilon(1e-13));
    CHECK(b.beta_min == doctest::Approx(alpha * alpha).epsilon(1e-13));
    const BetaStats bp = beta_stats_positive(init, make_weights_positive(init, depth));
    CHECK(bp.beta_1 == doctest::Approx(n * alpha * alpha).epsilon(1e-13));
    CHECK(bp.beta_min == doctest::Approx(alpha * alpha).epsilon(1e-13));
  }
  const double c = 0.37;
  const Vector one{{c}};
  const BetaStats b3 = beta_stats(one, one, make_weights(one, one, 3));
  CHECK(b3.beta_1 == doctest::Approx(2.0 * std::pow(c, 2.0 / 3.0)).epsilon(1e-14));
  CHECK(b3.beta_min == doctest::Approx(std::pow(c, 2.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("c_l values") {
  CHECK(c_l(2) == 1.0);
  CHECK(c_l(4) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(c_l(3) == doctest::Approx(3.375).epsilon(1e-15));
  CHECK_THROWS_AS(c_l(1), ArgumentError);
}

TEST_CASE("epsilon_bound examples") {
  for (int depth = 2; depth <= 5; ++depth) CHECK(epsilon_bound(10.0, 0.5, 0.5, depth) == 0.0);
  const double beta_1 = 0.4;
  const double beta_min = 0.01;
  CHECK(epsilon_bound(std::exp(1.0) * beta_1, beta_1, beta_min, 2) ==
        doctest::Approx(std::log(beta_1 / beta_min)).epsilon(1e-14));

  CHECK_THROWS_AS(epsilon_bound(0.3, 0.4, 0.01, 2), PreconditionFailed);
  CHECK_THROWS_AS(epsilon_bound(10.0, 0.4, 0.5, 3), DegenerateInput);
  // beta_1 > 1: Q > c_L beta_1^(2/L) holds yet the denominator is negative.
  CHECK_FALSE(bound_precondition(8.0, 4.0, 3));
  CHECK_THROWS_AS(epsilon_bound(8.0, 4.0, 1.0, 3), PreconditionFailed);
}

TEST_CASE("epsilon scales like alpha^(L-2)") {
  // Uniform init: beta_1 = 2 N alpha^2, beta_min = alpha^2, Q = alpha^(2-L) Q1.
  const int n = 50;
  const double q1 = 3.0;
  for (int depth = 3; depth <= 5; ++depth) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (int k = 0; k < 8; ++k) {
      const double alpha = std::pow(10.0, -3.0 - 0.5 * k);
      const double eps = epsilon_bound(std::pow(alpha, 2.0 - depth) * q1, 2.0 * n * alpha * alpha,
                                       alpha * alpha, depth);
      xs.push_back(std::log(alpha));
      ys.push_back(std::log(eps));
    }
    const double slope = (ys.back() - ys.front()) / (xs.back() - xs.front());
    CHECK(std::abs(slope - (depth - 2)) <= 0.05);
  }
}

TEST_CASE("depth two identity") {
  oracle::Gen gen(2);
  for (int t = 0; t < 100; ++t) {
    const double alpha = std::pow(10.0, gen.uniform(-6.0, -1.0));
    const int n = gen.integer(1, 100);
    const double beta_1 = 2.0 * n * alpha * alpha;
    const double beta_min = alpha * alpha;
    const double q = beta_1 * gen.uniform(1.5, 1e6);
    const double eps = epsilon_bound(q, beta_1, beta_min, 2);
    CHECK(eps * std::log(q / beta_1) == doctest::Approx(std::log(beta_1 / beta_min)).epsilon(1e-14));
  }
}

TEST_CASE("epsilon monotonicity") {
  for (int depth = 2; depth <= 5; ++depth) {
    const double beta_min = 1e-4;
    for (double b1 = 1e-3; b1 < 1e-1; b1 *= 1.5) {
      double prev_q = std::numeric_limits<double>::infinity();
      for (double q = 100.0; q < 1e4; q *= 1.7) {
        const double e = epsilon_bound(q, b1, beta_min, depth);
        CHECK(e <= prev_q);
        prev_q = e;
        CHECK(epsilon_bound(q, b1 * 1.2, beta_min, depth) >= e);
      }
    }
  }
}

TEST_CASE("realized_gap examples") {
  const WeightSpec ws = make_weights(Vector::Ones(3), Vector::Ones(3), 2);
  const Vector zmin{{1.0, 0.0, -0.5}};
  const double q = 1.5;
  CHECK(realized_gap(zmin, ws, q) == 0.0);
  CHECK(realized_gap(2.0 * zmin, ws, q) == q);
}

TEST_CASE("scale invariance") {
  oracle::Gen gen(3);
  CHECK(scale_invariance_check(Vector::Ones(3), Vector::Ones(3), 5.0, 1.0, 3));
  CHECK(scale_invariance_check(gen.uniform_vector(5, 0.1, 1.0), gen.uniform_vector(5, 0.1, 1.0),
                               40.0, 10.0, 3));
  CHECK(scale_invariance_check(gen.uniform_vector(5, 0.1, 1.0), gen.uniform_vector(5, 0.1, 1.0),
                               40.0, 0.5, 2));
  for (int t = 0; t < 1000; ++t) {
    const int depth = gen.integer(2, 6);
    const int n = gen.integer(1, 20);
    const Vector u = gen.uniform_vector(n, 0.01, 1.0);
    const Vector v = gen.uniform_vector(n, 0.01, 1.0);
    const double lambda = std::pow(10.0, gen.uniform(-2.0, 2.0));
    REQUIRE(scale_invariance_check(u, v, gen.uniform(50.0, 500.0), lambda, depth));
  }
  CHECK_THROWS_AS(scale_invariance_check(Vector::Ones(2), Vector::Ones(2), 1.0, 0.0, 2),
                  ArgumentError);
}

TEST_CASE("best s-term error") {
  const Vector x{{3.0, -1.0, 2.0}};
  CHECK(best_s_term_error(x, 3) == 0.0);
  CHECK(best_s_term_error(x, 1) == 3.0);
  CHECK(best_s_term_error(x, 0) == 6.0);
  CHECK_THROWS_AS(best_s_term_error(x, 4), ArgumentError);
}

TEST_CASE("nsp error bound") {
  CHECK(nsp_error_bound(0.0, 1.0, 0.0, 0.5) == 0.0);
  CHECK(nsp_error_bound(0.1, 1.0, 0.0, 0.0) == doctest::Approx(0.1));
  CHECK(nsp_error_bound(0.2, 3.0, 0.5, 1.0 / 3.0) == doctest::Approx(2.0 * (0.6 + 1.0)));
  CHECK_THROWS_AS(nsp_error_bound(0.1, 1.0, 0.0, 1.0), ArgumentError);
}

TEST_CASE("bound report and json") {
  const Vector init = Vector::Constant(4, 1e-6);
  const WeightSpec ws = make_weights_positive(init, 2);
  const BetaStats b = beta_stats_positive(init, ws);
  const Vector x_limit{{1.0, 0.0, 0.0, 0.0}};
  BoundReport r = make_bound_report(1.0, b, 2, x_limit, ws, 1e-9);
  CHECK(r.precondition_ok);
  CHECK(r.realized_gap == 0.0);
  CHECK(r.bound_satisfied);
  CHECK(r.slack == doctest::Approx(1e-8));
  r.alpha = 1e-3;
  r.m = 2;
  r.s = 1;
  const auto j = nlohmann::json::parse(bound_report_json(r));
  for (const char* key : {"q_min", "beta_1", "beta_min", "c_l", "precondition_ok", "epsilon",
                          "realized_gap", "bound_satisfied", "alpha", "L", "N", "M", "s"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["L"] == 2);
  CHECK(j["N"] == 4);

  const BoundReport bad = make_bound_report(1e-7, b, 2, x_limit, ws, 1e-9);
  CHECK_FALSE(bad.precondition_ok);
  CHECK(std::isnan(bad.epsilon));
  CHECK(nlohmann::json::parse(bound_report_json(bad))["epsilon"].is_null());
}

}
