#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "hflow/core.hpp"

namespace hflow {

// Element-wise product of the factors: x^L for the positive model,
// u^L - v^L for the signed one (with the branch products kept alongside).
struct ProductIterate {
  Vector x_tilde;
  Vector u_tilde;  // empty for the positive model
  Vector v_tilde;  // empty for the positive model
};

// Optimization variables of a depth-L factorized model. Either a single
// positive factor x (reduced model, x~ = x^L) or a pair (u, v) with
// x~ = u^L - v^L. Depth 1 is the unfactorized quadratic baseline.
class FactorState {
 public:
  // Factories check that the factors are strictly positive.
  static FactorState positive(Vector x, int depth);
  static FactorState signed_pair(Vector u, Vector v, int depth);
  // alpha * 1 initialization (alpha is the per-factor magnitude).
  static FactorState uniform_positive(Eigen::Index n, double alpha, int depth);
  static FactorState uniform_signed(Eigen::Index n, double alpha, int depth);

  bool is_signed() const { return signed_; }
  int depth() const { return depth_; }
  Eigen::Index size() const { return first_.size(); }

  const Vector& x() const;
  const Vector& u() const;
  const Vector& v() const;
  // Raw access for integrators; positivity is not re-checked.
  Vector& first() { return first_; }
  Vector& second() { return second_; }
  const Vector& first() const { return first_; }
  const Vector& second() const { return second_; }

  ProductIterate product() const;
  bool strictly_positive() const;

 private:
  FactorState(Vector first, Vector second, int depth, bool is_signed);

  Vector first_;
  Vector second_;
  int depth_ = 1;
  bool signed_ = false;
};

// A^T (A x~ - y)
Vector residual_correlation(const Problem& p, const Vector& x_tilde);

// 1/2 ||A x - y||^2
double loss_quadratic(const Problem& p, const Vector& x);

// 1/2 ||A x^L - y||^2, positive model only.
double loss_reduced(const Problem& p, const FactorState& state);

// L [A^T (A x^L - y)] . x^(L-1). This is the exact gradient of the reduced
// loss. The per-factor gradient of the overparameterized loss at identical
// factors (grad_over_factor) is this divided by L; the two flows differ only
// by the time rescaling t -> L t.
Vector grad_reduced(const Problem& p, const FactorState& state);

// 1/2 ||A (u^L - v^L) - y||^2, signed model only.
double loss_signed(const Problem& p, const FactorState& state);

// (L g . u^(L-1), -L g . v^(L-1)) with g = A^T (A (u^L - v^L) - y).
std::pair<Vector, Vector> grad_signed(const Problem& p, const FactorState& state);

// Dispatches on the model kind.
double loss(const Problem& p, const FactorState& state);

// 1/2 ||A (x1 . x2 . ... . xL) - y||^2 for arbitrary factors.
double loss_over(const Problem& p, const std::vector<Vector>& factors);

// Gradient of loss_over with respect to factor k (0-based):
// [A^T (A x~ - y)] . prod_{l != k} x_l.
Vector grad_over_factor(const Problem& p, const std::vector<Vector>& factors, std::size_t k);

// Loss and gradient blocks from a single residual evaluation.
struct GradientEval {
  double loss = 0.0;
  Vector x_tilde;
  Vector correlation;  // A^T (A x~ - y)
  Vector grad_first;   // d/dx or d/du
  Vector grad_second;  // d/dv, empty for the positive model
  // Scratch kept so repeated evaluation into the same object does not allocate.
  Vector first_pow;
  Vector second_pow;
  Vector residual;
  double grad_norm_sq() const;
};

GradientEval evaluate(const Problem& p, const FactorState& state);

// Same values as evaluate(), written into `out` and reusing its storage.
void evaluate_into(const Problem& p, const FactorState& state, GradientEval& out);

}  // namespace hflow
