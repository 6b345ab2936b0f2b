#pragma once

#include <Eigen/Cholesky>
#include <optional>

#include "hflow/bounds.hpp"
#include "hflow/core.hpp"

namespace hflow {

struct BpConfig {
  double penalty_rho = 1.0;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  long long max_iters = 100'000;
  bool nonneg = false;
  std::optional<WeightSpec> weights;  // unweighted when absent
};

struct BpResult {
  Vector z_hat;
  double l1_value = 0.0;  // under the configured weights
  double primal_residual = 0.0;  // ||A z_hat - y||
  double dual_residual = 0.0;
  long long iterations = 0;
  bool converged = false;
  bool polished = false;  // z_hat came from the support refit
};

// Cholesky factor of A A^T with a conditioning check, shared by the
// projection-based solvers.
class GramFactor {
 public:
  // Throws RankDeficient when A A^T is numerically singular.
  explicit GramFactor(const Matrix& a);
  // (A A^T)^{-1} b
  Vector solve(const Vector& b) const;
  // Projection of v onto {x : A x = y}.
  Vector project(const Vector& v, const Vector& y) const;

 private:
  Matrix a_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// min sum_n w+_n max(z_n, 0) + w-_n max(-z_n, 0)  s.t.  A z = y  (and z >= 0
// when nonneg), by ADMM: projection onto the affine set alternating with a
// per-coordinate asymmetric shrinkage, with residual balancing of the penalty.
// A final support refit is kept when it is exactly feasible, sign-consistent
// and no worse than the ADMM iterate. Non-convergence is reported through
// converged = false with the last iterate.
BpResult basis_pursuit(const Problem& p, const BpConfig& cfg = {});

// A^T (A A^T)^{-1} y
Vector min_l2_solution(const Problem& p);

// Largest eigenvalue of A^T A by power iteration from a fixed start.
double spectral_norm_sq(const Matrix& a, int iters = 500);

struct GdResult {
  Vector x;
  long long iterations = 0;
};

// x <- x - eta A^T (A x - y) from x = 0. Throws StepTooLarge when
// eta >= 2 / ||A^T A|| or the iterates blow up.
Vector gd_quadratic(const Problem& p, double eta, long long iters);

// As gd_quadratic, stopping early once the loss falls below loss_tol or the
// iterate stops moving (relative step below 1e-15).
GdResult gd_quadratic_until(const Problem& p, double eta, long long max_iters, double loss_tol);

struct BruteForceResult {
  Vector z;
  double value = 0.0;
};

// Exact (weighted) l1 minimizer by enumerating supports of size <= M.
// Throws TooLarge for N > 12 and Infeasible when no support fits y.
BruteForceResult brute_force_l1(const Problem& p, bool nonneg,
                                const std::optional<WeightSpec>& weights = std::nullopt);

}  // namespace hflow
