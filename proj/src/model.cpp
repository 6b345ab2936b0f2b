#include "hflow/model.hpp"

#include <string>

#include "hflow/errors.hpp"

namespace hflow {

namespace {

void check_length(const Problem& p, const Vector& x, const char* what) {
  if (x.size() != p.cols()) {
    throw ArgumentError(std::string(what) + ": vector length " + std::to_string(x.size()) +
                        " does not match problem columns " + std::to_string(p.cols()));
  }
}

const FactorState& require_positive(const FactorState& s, const char* what) {
  if (s.is_signed()) throw ModelMismatch(std::string(what) + ": requires the positive model");
  return s;
}

const FactorState& require_signed(const FactorState& s, const char* what) {
  if (!s.is_signed()) throw ModelMismatch(std::string(what) + ": requires the signed model");
  return s;
}

}  // namespace

FactorState::FactorState(Vector first, Vector second, int depth, bool is_signed)
    : first_(std::move(first)), second_(std::move(second)), depth_(depth), signed_(is_signed) {
  if (depth_ < 1) throw ArgumentError("FactorState: depth must be >= 1");
}

FactorState FactorState::positive(Vector x, int depth) {
  if (!(x.array() > 0.0).all()) throw DomainError("FactorState: factor must be strictly positive");
  return FactorState(std::move(x), Vector(), depth, false);
}

FactorState FactorState::signed_pair(Vector u, Vector v, int depth) {
  if (u.size() != v.size()) throw ArgumentError("FactorState: u and v differ in length");
  if (!(u.array() > 0.0).all() || !(v.array() > 0.0).all()) {
    throw DomainError("FactorState: factors must be strictly positive");
  }
  return FactorState(std::move(u), std::move(v), depth, true);
}

FactorState FactorState::uniform_positive(Eigen::Index n, double alpha, int depth) {
  return positive(Vector::Constant(n, alpha), depth);
}

FactorState FactorState::uniform_signed(Eigen::Index n, double alpha, int depth) {
  return signed_pair(Vector::Constant(n, alpha), Vector::Constant(n, alpha), depth);
}

const Vector& FactorState::x() const {
  if (signed_) throw ModelMismatch("FactorState::x on a signed state");
  return first_;
}

const Vector& FactorState::u() const {
  if (!signed_) throw ModelMismatch("FactorState::u on a positive state");
  return first_;
}

const Vector& FactorState::v() const {
  if (!signed_) throw ModelMismatch("FactorState::v on a positive state");
  return second_;
}

ProductIterate FactorState::product() const {
  ProductIterate out;
  if (!signed_) {
    out.x_tilde = hadamard_ipow(first_, depth_);
    return out;
  }
  out.u_tilde = hadamard_ipow(first_, depth_);
  out.v_tilde = hadamard_ipow(second_, depth_);
  out.x_tilde = out.u_tilde - out.v_tilde;
  return out;
}

bool FactorState::strictly_positive() const {
  return (first_.array() > 0.0).all() && (!signed_ || (second_.array() > 0.0).all());
}

Vector residual_correlation(const Problem& p, const Vector& x_tilde) {
  check_length(p, x_tilde, "residual_correlation");
  const Vector r = p.matrix() * x_tilde - p.measurements();
  return p.matrix().transpose() * r;
}

double loss_quadratic(const Problem& p, const Vector& x) {
  check_length(p, x, "loss_quadratic");
  return 0.5 * (p.matrix() * x - p.measurements()).squaredNorm();
}

double loss_reduced(const Problem& p, const FactorState& state) {
  require_positive(state, "loss_reduced");
  return loss_quadratic(p, hadamard_ipow(state.x(), state.depth()));
}

Vector grad_reduced(const Problem& p, const FactorState& state) {
  require_positive(state, "grad_reduced");
  const int depth = state.depth();
  const Vector g = residual_correlation(p, hadamard_ipow(state.x(), depth));
  return static_cast<double>(depth) * g.cwiseProduct(hadamard_ipow(state.x(), depth - 1));
}

double loss_signed(const Problem& p, const FactorState& state) {
  require_signed(state, "loss_signed");
  const int depth = state.depth();
  return loss_quadratic(p, hadamard_ipow(state.u(), depth) - hadamard_ipow(state.v(), depth));
}

std::pair<Vector, Vector> grad_signed(const Problem& p, const FactorState& state) {
  require_signed(state, "grad_signed");
  const int depth = state.depth();
  const Vector g =
      residual_correlation(p, hadamard_ipow(state.u(), depth) - hadamard_ipow(state.v(), depth));
  const double l = static_cast<double>(depth);
  return {l * g.cwiseProduct(hadamard_ipow(state.u(), depth - 1)),
          -l * g.cwiseProduct(hadamard_ipow(state.v(), depth - 1))};
}

double loss(const Problem& p, const FactorState& state) {
  return state.is_signed() ? loss_signed(p, state) : loss_reduced(p, state);
}

namespace {

Vector product_of(const std::vector<Vector>& factors, std::size_t skip, Eigen::Index n) {
  Vector out = Vector::Ones(n);
  for (std::size_t l = 0; l < factors.size(); ++l) {
    if (l == skip) continue;
    out.array() *= factors[l].array();
  }
  return out;
}

void check_factors(const Problem& p, const std::vector<Vector>& factors) {
  if (factors.empty()) throw ArgumentError("overparameterized loss: no factors");
  for (const auto& f : factors) check_length(p, f, "overparameterized loss");
}

}  // namespace

double loss_over(const Problem& p, const std::vector<Vector>& factors) {
  check_factors(p, factors);
  return loss_quadratic(p, product_of(factors, factors.size(), p.cols()));
}

Vector grad_over_factor(const Problem& p, const std::vector<Vector>& factors, std::size_t k) {
  if (factors.size() < 2) throw ArgumentError("grad_over_factor: need at least 2 factors");
  if (k >= factors.size()) {
    throw IndexError("grad_over_factor: factor index " + std::to_string(k) + " out of range");
  }
  check_factors(p, factors);
  const Vector g = residual_correlation(p, product_of(factors, factors.size(), p.cols()));
  return g.cwiseProduct(product_of(factors, k, p.cols()));
}

double GradientEval::grad_norm_sq() const {
  return grad_first.squaredNorm() + (grad_second.size() ? grad_second.squaredNorm() : 0.0);
}

namespace {

// x^k by repeated multiplication, as hadamard_ipow, into existing storage.
void ipow_into(const Vector& x, int k, Vector& out) {
  out.setOnes(x.size());
  for (int i = 0; i < k; ++i) out.array() *= x.array();
}

}  // namespace

void evaluate_into(const Problem& p, const FactorState& state, GradientEval& out) {
  const int depth = state.depth();
  const double l = static_cast<double>(depth);
  ipow_into(state.first(), depth - 1, out.first_pow);
  out.x_tilde = out.first_pow.cwiseProduct(state.first());
  if (state.is_signed()) {
    ipow_into(state.second(), depth - 1, out.second_pow);
    out.x_tilde -= out.second_pow.cwiseProduct(state.second());
  }
  check_length(p, out.x_tilde, "evaluate");
  out.residual.noalias() = p.matrix() * out.x_tilde;
  out.residual -= p.measurements();
  out.loss = 0.5 * out.residual.squaredNorm();
  out.correlation.noalias() = p.matrix().transpose() * out.residual;
  out.grad_first = l * out.correlation.cwiseProduct(out.first_pow);
  if (state.is_signed()) {
    out.grad_second = -l * out.correlation.cwiseProduct(out.second_pow);
  } else {
    out.grad_second.resize(0);
  }
}

GradientEval evaluate(const Problem& p, const FactorState& state) {
  GradientEval out;
  evaluate_into(p, state, out);
  return out;
}

}  // namespace hflow
