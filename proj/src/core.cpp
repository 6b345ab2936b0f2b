#include "hflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hflow/errors.hpp"

namespace hflow {

Problem::Problem(Matrix matrix_a, Vector measurements_y)
    : a_(std::move(matrix_a)), y_(std::move(measurements_y)) {
  if (a_.rows() < 1 || a_.cols() < 1) {
    throw ArgumentError("Problem: matrix must have at least one row and one column");
  }
  if (y_.size() != a_.rows()) {
    throw ArgumentError("Problem: measurements length " + std::to_string(y_.size()) +
                        " does not match rows " + std::to_string(a_.rows()));
  }
  if (!a_.allFinite() || !y_.allFinite()) {
    throw ArgumentError("Problem: non-finite entries");
  }
}

Problem Problem::with_measurements(Vector y) const { return Problem(a_, std::move(y)); }

Vector hadamard_pow(const Vector& x, double p) {
  const bool integral = std::floor(p) == p;
  if (!integral || p < 0.0) {
    if ((x.array() <= 0.0).any()) {
      throw DomainError("hadamard_pow: non-positive entry with non-integer or negative exponent");
    }
  }
  // Small integer powers go through repeated multiplication so that
  // hadamard_pow(x, L) and the hot-path hadamard_ipow(x, L) agree exactly.
  if (integral && p >= 0.0 && p <= 64.0) return hadamard_ipow(x, static_cast<int>(p));
  return x.array().pow(p).matrix();
}

Vector hadamard_ipow(const Vector& x, int k) {
  if (k < 0) throw ArgumentError("hadamard_ipow: negative exponent");
  Vector out = Vector::Ones(x.size());
  for (int i = 0; i < k; ++i) out.array() *= x.array();
  return out;
}

Matrix gaussian_sensing_matrix(int m, int n, Rng& rng) {
  if (m < 1 || n < 1) throw ArgumentError("gaussian_sensing_matrix: m and n must be >= 1");
  Matrix a(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal() * scale;
  }
  return a;
}

GroundTruth sparse_ground_truth(int n, int s, bool signed_values, Rng& rng) {
  if (s < 1 || s > n) {
    throw ArgumentError("sparse_ground_truth: need 1 <= s <= n, got s=" + std::to_string(s) +
                        " n=" + std::to_string(n));
  }
  // Partial Fisher-Yates: the first s slots are a uniform s-subset.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  for (int i = 0; i < s; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  GroundTruth gt;
  gt.support.assign(perm.begin(), perm.begin() + s);
  std::sort(gt.support.begin(), gt.support.end());

  gt.x_star = Vector::Zero(n);
  for (auto idx : gt.support) {
    const double b = rng.normal();
    gt.x_star(idx) = signed_values ? b : std::abs(b);
  }
  const double norm = gt.x_star.norm();
  // A zero Gaussian draw has probability zero; guard anyway.
  if (norm == 0.0) throw DomainError("sparse_ground_truth: degenerate all-zero draw");
  gt.x_star /= norm;
  return gt;
}

double weighted_l1(const Vector& z, const Vector& w) {
  if (z.size() != w.size()) throw ArgumentError("weighted_l1: length mismatch");
  // Sequential sum, same order as signed_weighted_l1 so the two agree bit-for-bit.
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) != 0.0) total += w(i) * std::abs(z(i));
  }
  return total;
}

double signed_weighted_l1(const Vector& z, const Vector& w_plus, const Vector& w_minus) {
  if (z.size() != w_plus.size() || z.size() != w_minus.size()) {
    throw ArgumentError("signed_weighted_l1: length mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) > 0.0) {
      total += w_plus(i) * z(i);
    } else if (z(i) < 0.0) {
      total += w_minus(i) * -z(i);
    }
  }
  return total;
}

Vector positive_part(const Vector& z) { return z.cwiseMax(0.0); }

Vector negative_part(const Vector& z) { return (-z).cwiseMax(0.0); }

}  // namespace hflow
