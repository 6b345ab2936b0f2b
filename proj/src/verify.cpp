#include "hflow/verify.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

#include "hflow/bounds.hpp"
#include "hflow/bregman.hpp"
#include "hflow/errors.hpp"
#include "hflow/flow.hpp"
#include "hflow/io.hpp"
#include "hflow/model.hpp"

namespace hflow {

namespace {

Vector uniform_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = lo + (hi - lo) * rng.uniform();
  return v;
}

Vector normal_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x) {
  const double h = 1e-6;
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

double rel_diff(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

CheckResult verdict(const std::string& suite, const std::string& name, bool ok,
                    const std::string& detail) {
  return CheckResult{suite, name, ok, detail};
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed, bool fault) {
  Rng rng(seed, 1);
  double worst_reduced = 0.0;
  double worst_signed = 0.0;
  double worst_over = 0.0;
  double worst_identity = 0.0;
  for (int depth = 2; depth <= 5; ++depth) {
    for (int t = 0; t < 10; ++t) {
      const Problem p(gaussian_sensing_matrix(4, 8, rng), normal_vector(rng, 4));
      const Vector x = uniform_vector(rng, 8, 0.3, 1.2);
      const auto pos = FactorState::positive(x, depth);
      Vector g = grad_reduced(p, pos);
      if (fault) g = -g;
      const Vector fd = central_difference(
          [&](const Vector& w) { return loss_quadratic(p, hadamard_ipow(w, depth)); }, x);
      worst_reduced = std::max(worst_reduced, rel_diff(g, fd));

      const Vector v = uniform_vector(rng, 8, 0.3, 1.2);
      const auto [gu, gv] = grad_signed(p, FactorState::signed_pair(x, v, depth));
      const Vector vp = hadamard_ipow(v, depth);
      const Vector xp = hadamard_ipow(x, depth);
      const Vector fdu = central_difference(
          [&](const Vector& w) { return loss_quadratic(p, hadamard_ipow(w, depth) - vp); }, x);
      const Vector fdv = central_difference(
          [&](const Vector& w) { return loss_quadratic(p, xp - hadamard_ipow(w, depth)); }, v);
      worst_signed = std::max({worst_signed, rel_diff(gu, fdu), rel_diff(gv, fdv)});

      std::vector<Vector> factors;
      for (int k = 0; k < depth; ++k) factors.push_back(uniform_vector(rng, 8, 0.3, 1.2));
      const std::size_t k = static_cast<std::size_t>(t % depth);
      const Vector fdo = central_difference(
          [&](const Vector& w) {
            auto copy = factors;
            copy[k] = w;
            return loss_over(p, copy);
          },
          factors[k]);
      worst_over = std::max(worst_over, rel_diff(grad_over_factor(p, factors, k), fdo));

      const std::vector<Vector> same(static_cast<std::size_t>(depth), x);
      const Vector scaled = static_cast<double>(depth) * grad_over_factor(p, same, 0);
      worst_identity = std::max(worst_identity, rel_diff(scaled, grad_reduced(p, pos)));
    }
  }
  const std::string s = "gradient";
  return {
      verdict(s, "grad_reduced_fd", worst_reduced <= 1e-5,
              "max rel err " + format_double(worst_reduced)),
      verdict(s, "grad_signed_fd", worst_signed <= 1e-5, "max rel err " + format_double(worst_signed)),
      verdict(s, "grad_over_factor_fd", worst_over <= 1e-5,
              "max rel err " + format_double(worst_over)),
      verdict(s, "reduction_identity", worst_identity <= 1e-13,
              "max rel err " + format_double(worst_identity)),
  };
}

CheckResult sandwich_check(std::uint64_t seed) {
  Rng rng(seed, 2);
  double worst = 0.0;  // largest violation of either side
  for (int depth = 2; depth <= 4; ++depth) {
    for (int t = 0; t < 1000; ++t) {
      const auto n = static_cast<Eigen::Index>(1 + rng.uniform_below(6));
      const Vector x = uniform_vector(rng, n, 1e-3, 2.0);
      const Vector z = uniform_vector(rng, n, 0.0, 2.0);
      const Vector w = hadamard_pow(x, 2.0 / depth - 1.0);
      const double a = weighted_l1(z, w);
      const double g = g_value(x, z, depth);
      worst = std::max({worst, g_tilde(a, weighted_l1(x, w), depth) - g,
                        g - g_tilde(a, w.cwiseProduct(x).minCoeff(), depth)});
    }
  }
  return verdict("bregman", "g_tilde_sandwich", worst <= 1e-12,
                 "max violation " + format_double(worst));
}

CheckResult delta_constancy_check(std::uint64_t seed) {
  Rng rng(seed, 3);
  const Matrix a = gaussian_sensing_matrix(3, 8, rng);
  const Vector z1 = uniform_vector(rng, 8, 0.5, 1.5);
  const Problem p(a, a * z1);
  const Eigen::MatrixXd dense = a;
  const Vector k = Eigen::FullPivLU<Eigen::MatrixXd>(dense).kernel().col(0);
  const Vector z2 = z1 + (0.25 / k.cwiseAbs().maxCoeff()) * k;

  StopRule stop;
  stop.loss_tol = 1e-18;
  stop.max_iters = 50'000'000;
  stop.stall_window = 0;
  const FactorState init = FactorState::uniform_positive(8, 0.3, 2);
  const FlowResult r = run_flow(p, init, StepPolicy::fixed(1e-4), stop);
  const Potential pot(2);
  const Vector& x0 = init.product().x_tilde;
  const Vector& xt = r.final_product.x_tilde;
  const double d1 = bregman_divergence(pot, z1, x0) - bregman_divergence(pot, z1, xt);
  const double d2 = bregman_divergence(pot, z2, x0) - bregman_divergence(pot, z2, xt);
  const double rel = std::abs(d1 - d2) / std::max(std::abs(d1), std::abs(d2));
  return verdict("bregman", "delta_z_constancy", r.converged() && rel <= 1e-3,
                 "relative spread " + format_double(rel) + " after " +
                     std::to_string(r.iterations) + " steps");
}

CheckResult dissipation_refinement_check(std::uint64_t seed) {
  Rng rng(seed, 4);
  const Matrix a = gaussian_sensing_matrix(4, 10, rng);
  const Vector z = uniform_vector(rng, 10, 0.2, 1.0);
  const Problem p(a, a * z);
  const Vector x = uniform_vector(rng, 10, 0.3, 1.0);
  const int depth = 3;
  const Potential pot(depth);
  const auto state = FactorState::positive(x, depth);
  const Vector g = grad_reduced(p, state);
  auto residual = [&](double eta) {
    const auto next = FactorState::positive(x - eta * g, depth);
    return dissipation_residual(p, pot, z, state.product(), next.product(), eta);
  };
  const double ratio = std::abs(residual(1e-5)) / std::abs(residual(5e-6));
  return verdict("bregman", "dissipation_refinement", ratio >= 1.6 && ratio <= 2.4,
                 "halving eta shrinks the residual by " + format_double(ratio));
}

CheckResult divergence_sign_check(std::uint64_t seed) {
  Rng rng(seed, 5);
  double worst = 0.0;
  for (int depth = 2; depth <= 5; ++depth) {
    const Potential pot(depth);
    for (int t = 0; t < 1000; ++t) {
      const Vector z = uniform_vector(rng, 5, 0.0, 3.0);
      const Vector x = uniform_vector(rng, 5, 1e-3, 3.0);
      worst = std::min(worst, bregman_divergence(pot, z, x));
    }
  }
  return verdict("bregman", "divergence_nonnegative", worst >= -1e-12,
                 "most negative value " + format_double(worst));
}

std::vector<CheckResult> bounds_suite(std::uint64_t seed) {
  Rng rng(seed, 6);
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const int depth = 2 + static_cast<int>(rng.uniform_below(5));
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_below(20));
    const Vector u = uniform_vector(rng, n, 0.01, 1.0);
    const Vector v = uniform_vector(rng, n, 0.01, 1.0);
    const double lambda = std::pow(10.0, -2.0 + 4.0 * rng.uniform());
    if (!scale_invariance_check(u, v, 50.0 + 450.0 * rng.uniform(), lambda, depth)) ++failures;
  }

  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double alpha = std::pow(10.0, -6.0 + 5.0 * rng.uniform());
    const double n = 1.0 + static_cast<double>(rng.uniform_below(100));
    const double beta_1 = 2.0 * n * alpha * alpha;
    const double beta_min = alpha * alpha;
    const double q = beta_1 * (1.5 + 1e6 * rng.uniform());
    const double lhs = epsilon_bound(q, beta_1, beta_min, 2) * std::log(q / beta_1);
    const double rhs = std::log(beta_1 / beta_min);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1e-300, std::abs(rhs)));
  }
  return {
      verdict("bounds", "scale_invariance", failures == 0,
              std::to_string(failures) + " of 1000 tuples differ"),
      verdict("bounds", "depth_two_identity", worst <= 1e-13, "max rel err " + format_double(worst)),
  };
}

}  // namespace

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"gradient", "bregman", "bounds"};
  return names;
}

std::vector<CheckResult> run_verify(const VerifyOptions& opts) {
  const auto& known = verify_suite_names();
  for (const auto& s : opts.suites) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw ArgumentError("unknown verify suite '" + s + "'");
    }
  }
  auto selected = [&](const std::string& name) {
    return opts.suites.empty() ||
           std::find(opts.suites.begin(), opts.suites.end(), name) != opts.suites.end();
  };

  std::vector<CheckResult> out;
  auto guarded = [&](const std::string& suite, const std::string& name,
                     const std::function<std::vector<CheckResult>()>& body) {
    try {
      for (auto& r : body()) out.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.push_back({suite, name, false, std::string("threw: ") + e.what()});
    }
  };
  if (selected("gradient")) {
    guarded("gradient", "all", [&] { return gradient_suite(opts.seed, opts.inject_gradient_fault); });
  }
  if (selected("bregman")) {
    guarded("bregman", "g_tilde_sandwich", [&] { return std::vector{sandwich_check(opts.seed)}; });
    guarded("bregman", "divergence_nonnegative",
            [&] { return std::vector{divergence_sign_check(opts.seed)}; });
    guarded("bregman", "delta_z_constancy", [&] { return std::vector{delta_constancy_check(opts.seed)}; });
    guarded("bregman", "dissipation_refinement",
            [&] { return std::vector{dissipation_refinement_check(opts.seed)}; });
  }
  if (selected("bounds")) guarded("bounds", "all", [&] { return bounds_suite(opts.seed); });
  return out;
}

void print_verify_report(std::ostream& os, const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.suite << '/' << r.name << ": " << r.detail << '\n';
  }
}

}  // namespace hflow
