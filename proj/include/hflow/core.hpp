#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "hflow/rng.hpp"

namespace hflow {

using Vector = Eigen::VectorXd;
// Row-major so that A x is a sequence of contiguous row dot products.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A sensing instance y = A x with A of shape M x N.
class Problem {
 public:
  Problem(Matrix matrix_a, Vector measurements_y);

  const Matrix& matrix() const { return a_; }
  const Vector& measurements() const { return y_; }
  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index cols() const { return a_.cols(); }

  // Same matrix, different right-hand side.
  Problem with_measurements(Vector y) const;

 private:
  Matrix a_;
  Vector y_;
};

struct GroundTruth {
  Vector x_star;
  std::vector<Eigen::Index> support;  // sorted ascending
  int sparsity() const { return static_cast<int>(support.size()); }
};

// x^p element-wise. Non-integer or negative p requires x > 0.
Vector hadamard_pow(const Vector& x, double p);

// x^k for a non-negative integer k by repeated multiplication. No domain
// restriction; this is the hot-path power used by the losses and gradients.
Vector hadamard_ipow(const Vector& x, int k);

// (1/sqrt(m)) W with W i.i.d. standard normal, drawn row by row.
Matrix gaussian_sensing_matrix(int m, int n, Rng& rng);

// s-sparse unit-norm vector: uniform support, Gaussian values, |.| unless signed.
GroundTruth sparse_ground_truth(int n, int s, bool signed_values, Rng& rng);

double weighted_l1(const Vector& z, const Vector& w);

// sum_n w_plus_n max(z_n, 0) + w_minus_n max(-z_n, 0)
double signed_weighted_l1(const Vector& z, const Vector& w_plus, const Vector& w_minus);

Vector positive_part(const Vector& z);
Vector negative_part(const Vector& z);

}  // namespace hflow
