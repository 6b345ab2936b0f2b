#include "hflow/baselines.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "hflow/errors.hpp"

namespace hflow {

namespace {

struct Weights {
  Vector plus;
  Vector minus;
};

Weights resolve_weights(const std::optional<WeightSpec>& ws, Eigen::Index n) {
  if (!ws) return {Vector::Ones(n), Vector::Ones(n)};
  if (ws->w_plus.size() != n || ws->w_minus.size() != n) {
    throw ArgumentError("basis pursuit: weight length does not match problem columns");
  }
  if ((ws->w_plus.array() < 0.0).any() || (ws->w_minus.array() < 0.0).any()) {
    throw DomainError("basis pursuit: weights must be >= 0");
  }
  return {ws->w_plus, ws->w_minus};
}

double objective(const Vector& z, const Weights& w, bool nonneg) {
  if (nonneg && (z.array() < 0.0).any()) return std::numeric_limits<double>::infinity();
  return signed_weighted_l1(z, w.plus, w.minus);
}

// prox of f / rho: asymmetric soft threshold, clipped at 0 in nonneg mode.
Vector shrink(const Vector& t, const Weights& w, double rho, bool nonneg) {
  Vector out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double hi = w.plus(i) / rho;
    const double lo = w.minus(i) / rho;
    if (t(i) > hi) {
      out(i) = t(i) - hi;
    } else if (!nonneg && t(i) < -lo) {
      out(i) = t(i) + lo;
    } else {
      out(i) = 0.0;
    }
  }
  return out;
}

Matrix select_columns(const Matrix& a, const std::vector<Eigen::Index>& cols) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
  return out;
}

double feasibility_tol(const Problem& p) { return 1e-10 * std::max(1.0, p.measurements().norm()); }

// Least-squares refit of y on the columns in `support`. Empty optional when the
// columns are dependent or the fit does not reproduce y.
std::optional<Vector> refit_support(const Problem& p, const std::vector<Eigen::Index>& support) {
  const Eigen::Index n = p.cols();
  if (support.empty()) {
    if (p.measurements().norm() <= feasibility_tol(p)) return Vector::Zero(n);
    return std::nullopt;
  }
  if (static_cast<Eigen::Index>(support.size()) > p.rows()) return std::nullopt;
  const Matrix sub = select_columns(p.matrix(), support);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
  if (qr.rank() < static_cast<Eigen::Index>(support.size())) return std::nullopt;
  const Vector coef = qr.solve(p.measurements());
  Vector z = Vector::Zero(n);
  for (std::size_t k = 0; k < support.size(); ++k) z(support[k]) = coef(static_cast<Eigen::Index>(k));
  if ((p.matrix() * z - p.measurements()).norm() > feasibility_tol(p)) return std::nullopt;
  return z;
}

// Lower bound t y^T lambda, where t shrinks A^T lambda into the dual box
// {-w- <= A^T lambda <= w+}.
double dual_lower_bound(const Problem& p, const Vector& lambda, const Weights& w, bool nonneg) {
  const Vector v = p.matrix().transpose() * lambda;
  double t = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) > w.plus(i)) t = std::min(t, w.plus(i) / v(i));
    if (!nonneg && v(i) < -w.minus(i)) t = std::min(t, w.minus(i) / -v(i));
  }
  return t * p.measurements().dot(lambda);
}

// Nearest point to `lambda` satisfying the KKT equalities on the support of z:
// a_i^T lambda = w+_i where z_i > 0 and -w-_i where z_i < 0.
std::optional<Vector> kkt_multiplier(const Problem& p, const Vector& z, const Vector& lambda,
                                     const Weights& w) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) != 0.0) support.push_back(i);
  }
  if (support.empty()) return std::nullopt;
  const Matrix sub = select_columns(p.matrix(), support);
  Vector target(static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    const Eigen::Index i = support[k];
    target(static_cast<Eigen::Index>(k)) = z(i) > 0.0 ? w.plus(i) : -w.minus(i);
  }
  const Eigen::MatrixXd subt = sub.transpose();
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(subt);
  const Vector fixed = lambda - cod.solve(subt * lambda - target);
  if (!fixed.allFinite()) return std::nullopt;
  return fixed;
}

struct Polish {
  Vector z;
  double value = 0.0;
};

std::optional<Polish> polish(const Problem& p, const Vector& z, const Weights& w, bool nonneg) {
  const double scale = z.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (std::abs(z(i)) > 1e-12 * scale) support.push_back(i);
  }
  auto fit = refit_support(p, support);
  if (!fit) return std::nullopt;
  for (auto i : support) {
    if (((*fit)(i) > 0.0) != (z(i) > 0.0)) return std::nullopt;
  }
  const double value = objective(*fit, w, nonneg);
  if (!std::isfinite(value)) return std::nullopt;
  return Polish{std::move(*fit), value};
}

}  // namespace

GramFactor::GramFactor(const Matrix& a) : a_(a) {
  const Eigen::MatrixXd gram = a_ * a_.transpose();
  llt_.compute(gram);
  if (llt_.info() != Eigen::Success || !(llt_.rcond() > 1e-14)) {
    throw RankDeficient("A A^T is numerically singular; A must have full row rank");
  }
}

Vector GramFactor::solve(const Vector& b) const { return llt_.solve(b); }

Vector GramFactor::project(const Vector& v, const Vector& y) const {
  return v - a_.transpose() * solve(a_ * v - y);
}

BpResult basis_pursuit(const Problem& p, const BpConfig& cfg) {
  if (!(cfg.penalty_rho > 0.0)) throw ArgumentError("basis_pursuit: penalty_rho must be > 0");
  if (!(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0)) {
    throw ArgumentError("basis_pursuit: tolerances must be > 0");
  }
  if (cfg.max_iters < 1) throw ArgumentError("basis_pursuit: max_iters must be >= 1");
  const Weights w = resolve_weights(cfg.weights, p.cols());
  const Eigen::Index n = p.cols();
  const Vector& y = p.measurements();

  BpResult res;
  if (y.norm() == 0.0) {
    res.z_hat = Vector::Zero(n);
    res.converged = true;
    return res;
  }

  const GramFactor gram(p.matrix());
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  double rho = cfg.penalty_rho;
  Vector z = gram.project(Vector::Zero(n), y);
  Vector x = z;
  Vector u = Vector::Zero(n);
  double r_norm = 0.0;
  double s_norm = 0.0;
  bool certified = false;
  std::optional<Polish> best;

  long long k = 0;
  while (k < cfg.max_iters) {
    ++k;
    x = gram.project(z - u, y);
    const Vector z_old = z;
    z = shrink(x + u, w, rho, cfg.nonneg);
    u += x - z;

    r_norm = (x - z).norm();
    s_norm = rho * (z - z_old).norm();
    const double eps_pri = sqrt_n * cfg.abs_tol + cfg.rel_tol * std::max(x.norm(), z.norm());
    const double eps_dual = sqrt_n * cfg.abs_tol + cfg.rel_tol * rho * u.norm();
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      res.converged = true;
      break;
    }

    if (k % 50 == 0) {
      auto cand = polish(p, z, w, cfg.nonneg);
      if (cand) {
        const Vector lambda = gram.solve(p.matrix() * (rho * u));
        double lower = dual_lower_bound(p, lambda, w, cfg.nonneg);
        if (auto fixed = kkt_multiplier(p, cand->z, lambda, w)) {
          lower = std::max(lower, dual_lower_bound(p, *fixed, w, cfg.nonneg));
        }
        if (cand->value - lower <= 1e-12 * std::max(1.0, cand->value)) {
          best = std::move(cand);
          certified = true;
          break;
        }
      }
    }

    if (k % 10 == 0) {
      if (r_norm > 10.0 * s_norm) {
        rho *= 2.0;
        u /= 2.0;
      } else if (s_norm > 10.0 * r_norm) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }

  if (!certified) {
    // x is feasible to solver precision; z carries the exact sparsity pattern.
    auto cand = polish(p, z, w, cfg.nonneg);
    const double admm_value = objective(cfg.nonneg ? x.cwiseMax(0.0) : x, w, cfg.nonneg);
    if (cand && cand->value <= admm_value + 10.0 * std::max(cfg.abs_tol, cfg.rel_tol * admm_value)) {
      best = std::move(cand);
    }
  }

  if (best) {
    res.z_hat = std::move(best->z);
    res.polished = true;
    res.converged = res.converged || certified;
  } else {
    res.z_hat = cfg.nonneg ? x.cwiseMax(0.0) : x;
  }
  res.l1_value = signed_weighted_l1(res.z_hat, w.plus, w.minus);
  res.primal_residual = (p.matrix() * res.z_hat - y).norm();
  res.dual_residual = s_norm;
  res.iterations = k;
  return res;
}

Vector min_l2_solution(const Problem& p) {
  const GramFactor gram(p.matrix());
  return p.matrix().transpose() * gram.solve(p.measurements());
}

double spectral_norm_sq(const Matrix& a, int iters) {
  Vector v = Vector::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (i > 0 && std::abs(next - lambda) <= 1e-14 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Both the Rayleigh quotient and ||A^T A v|| underestimate the top
  // eigenvalue; keep the larger.
  const Vector w = a.transpose() * (a * v);
  return std::max(lambda, w.norm());
}

GdResult gd_quadratic_until(const Problem& p, double eta, long long max_iters, double loss_tol) {
  if (!(eta > 0.0)) throw ArgumentError("gd_quadratic: eta must be > 0");
  if (max_iters < 0) throw ArgumentError("gd_quadratic: iters must be >= 0");
  const double sigma = spectral_norm_sq(p.matrix());
  if (eta * sigma >= 2.0) {
    throw StepTooLarge("gd_quadratic: eta must be below 2 / ||A^T A||");
  }
  const double ceiling = 1e12 * std::max(1.0, p.measurements().norm());
  GdResult res;
  res.x = Vector::Zero(p.cols());
  for (long long k = 0; k < max_iters; ++k) {
    const Vector r = p.matrix() * res.x - p.measurements();
    if (0.5 * r.squaredNorm() <= loss_tol) break;
    const Vector step = eta * (p.matrix().transpose() * r);
    res.x -= step;
    res.iterations = k + 1;
    if (!res.x.allFinite() || res.x.norm() > ceiling) {
      throw StepTooLarge("gd_quadratic: iterates diverged");
    }
    if (loss_tol > 0.0 && step.norm() <= 1e-15 * res.x.norm()) break;
  }
  return res;
}

Vector gd_quadratic(const Problem& p, double eta, long long iters) {
  return gd_quadratic_until(p, eta, iters, 0.0).x;
}

BruteForceResult brute_force_l1(const Problem& p, bool nonneg,
                                const std::optional<WeightSpec>& weights) {
  const Eigen::Index n = p.cols();
  if (n > 12) throw TooLarge("brute_force_l1: N must be <= 12");
  const Weights w = resolve_weights(weights, n);
  const auto max_size = static_cast<int>(std::min(p.rows(), n));

  std::optional<BruteForceResult> best;
  const unsigned limit = 1u << n;
  for (unsigned mask = 0; mask < limit; ++mask) {
    if (std::popcount(mask) > max_size) continue;
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) support.push_back(i);
    }
    auto fit = refit_support(p, support);
    if (!fit) continue;
    if (nonneg) {
      if ((fit->array() < -1e-12).any()) continue;
      *fit = fit->cwiseMax(0.0);
    }
    const double value = signed_weighted_l1(*fit, w.plus, w.minus);
    if (!best || value < best->value) best = BruteForceResult{std::move(*fit), value};
  }
  if (!best) throw Infeasible("brute_force_l1: no support reproduces y");
  return *best;
}

}  // namespace hflow
