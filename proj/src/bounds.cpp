#include "hflow/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "hflow/errors.hpp"

namespace hflow {

namespace {

void require_depth(int depth, const char* what) {
  if (depth < 2) throw ArgumentError(std::string(what) + ": depth must be >= 2");
}

void require_positive(const Vector& v, const char* what) {
  if (!(v.array() > 0.0).all()) throw DomainError(std::string(what) + ": entries must be > 0");
}

double gamma_of(int depth) { return 1.0 - 2.0 / depth; }

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

WeightSpec make_weights(const Vector& init_u_tilde, const Vector& init_v_tilde, int depth) {
  require_depth(depth, "make_weights");
  if (init_u_tilde.size() != init_v_tilde.size()) {
    throw ArgumentError("make_weights: length mismatch");
  }
  require_positive(init_u_tilde, "make_weights");
  require_positive(init_v_tilde, "make_weights");
  WeightSpec ws;
  ws.gamma = gamma_of(depth);
  if (depth == 2) {
    ws.w_plus = Vector::Ones(init_u_tilde.size());
    ws.w_minus = Vector::Ones(init_v_tilde.size());
  } else {
    ws.w_plus = init_u_tilde.array().pow(-ws.gamma).matrix();
    ws.w_minus = init_v_tilde.array().pow(-ws.gamma).matrix();
  }
  return ws;
}

WeightSpec make_weights_positive(const Vector& init_x_tilde, int depth) {
  WeightSpec ws = make_weights(init_x_tilde, init_x_tilde, depth);
  ws.w_minus = ws.w_plus;
  return ws;
}

BetaStats beta_stats(const Vector& init_u_tilde, const Vector& init_v_tilde, const WeightSpec& ws) {
  if (init_u_tilde.size() != ws.w_plus.size() || init_v_tilde.size() != ws.w_minus.size()) {
    throw ArgumentError("beta_stats: length mismatch");
  }
  const Vector pu = ws.w_plus.cwiseProduct(init_u_tilde);
  const Vector pv = ws.w_minus.cwiseProduct(init_v_tilde);
  return {pu.sum() + pv.sum(), std::min(pu.minCoeff(), pv.minCoeff())};
}

BetaStats beta_stats_positive(const Vector& init_x_tilde, const WeightSpec& ws) {
  if (init_x_tilde.size() != ws.w_plus.size()) throw ArgumentError("beta_stats: length mismatch");
  const Vector px = ws.w_plus.cwiseProduct(init_x_tilde);
  return {px.sum(), px.minCoeff()};
}

double c_l(int depth) {
  require_depth(depth, "c_l");
  if (depth == 2) return 1.0;
  const double l = depth;
  return std::pow(l / 2.0, l / (l - 2.0));
}

bool bound_precondition(double q, double beta_1, int depth) {
  const double c = c_l(depth);
  if (!(q > c * std::pow(beta_1, 2.0 / depth))) return false;
  return q > c * beta_1;
}

double epsilon_formula(double q, double beta_1, double beta_min, int depth) {
  require_depth(depth, "epsilon_formula");
  if (depth == 2) return std::log(beta_1 / beta_min) / std::log(q / beta_1);
  const double l = depth;
  const double g = gamma_of(depth);
  return l * (std::pow(beta_1, g) - std::pow(beta_min, g)) /
         (2.0 * std::pow(q, g) - l * std::pow(beta_1, g));
}

double epsilon_bound(double q, double beta_1, double beta_min, int depth) {
  require_depth(depth, "epsilon_bound");
  if (!(beta_1 > 0.0) || !(beta_min > 0.0)) {
    throw DomainError("epsilon_bound: beta values must be > 0");
  }
  if (beta_min > beta_1) throw DegenerateInput("epsilon_bound: beta_min exceeds beta_1");
  if (!bound_precondition(q, beta_1, depth)) {
    throw PreconditionFailed("epsilon_bound: Q does not exceed c_L beta_1^(2/L)");
  }
  return epsilon_formula(q, beta_1, beta_min, depth);
}

double realized_gap(const Vector& x_limit, const WeightSpec& ws, double q) {
  return signed_weighted_l1(x_limit, ws.w_plus, ws.w_minus) - q;
}

bool scale_invariance_check(const Vector& u0, const Vector& v0, double q, double lambda,
                            int depth) {
  if (!(lambda > 0.0)) throw ArgumentError("scale_invariance_check: lambda must be > 0");
  const Vector u_t = hadamard_ipow(u0, depth);
  const Vector v_t = hadamard_ipow(v0, depth);
  const BetaStats before = beta_stats(u_t, v_t, make_weights(u_t, v_t, depth));

  const Vector u_s = hadamard_ipow(lambda * u0, depth);
  const Vector v_s = hadamard_ipow(lambda * v0, depth);
  const WeightSpec ws_s = make_weights(u_s, v_s, depth);
  const BetaStats after = beta_stats(u_s, v_s, ws_s);
  // The minimizer set scales by lambda^L with y; its weighted norm then picks
  // up the weight factor lambda^(-L gamma).
  const double q_s = q * std::pow(lambda, depth) * std::pow(lambda, -depth * ws_s.gamma);

  const double e0 = epsilon_formula(q, before.beta_1, before.beta_min, depth);
  const double e1 = epsilon_formula(q_s, after.beta_1, after.beta_min, depth);
  if (e0 == e1) return true;
  return std::abs(e0 - e1) <= 1e-12 * std::max(std::abs(e0), std::abs(e1));
}

double best_s_term_error(const Vector& x, int s) {
  if (s < 0 || s > x.size()) throw ArgumentError("best_s_term_error: need 0 <= s <= N");
  std::vector<double> mags(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(x(i));
  std::sort(mags.begin(), mags.end());
  double total = 0.0;
  for (std::size_t i = 0; i + static_cast<std::size_t>(s) < mags.size(); ++i) total += mags[i];
  return total;
}

double nsp_error_bound(double epsilon, double x_star_l1, double sigma_s, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("nsp_error_bound: rho must be in [0, 1)");
  return (1.0 + rho) / (1.0 - rho) * (epsilon * x_star_l1 + 2.0 * sigma_s);
}

BoundReport make_bound_report(double q, const BetaStats& beta, int depth, const Vector& x_limit,
                              const WeightSpec& ws, double baseline_tol) {
  BoundReport r;
  r.q_min = q;
  r.beta_1 = beta.beta_1;
  r.beta_min = beta.beta_min;
  r.c_l = c_l(depth);
  r.depth = depth;
  r.n = static_cast<int>(x_limit.size());
  r.precondition_ok = bound_precondition(q, beta.beta_1, depth) && beta.beta_min <= beta.beta_1;
  r.epsilon = r.precondition_ok ? epsilon_formula(q, beta.beta_1, beta.beta_min, depth)
                                : std::numeric_limits<double>::quiet_NaN();
  r.realized_gap = realized_gap(x_limit, ws, q);
  r.slack = std::max(1e-8, 10.0 * baseline_tol) * q;
  r.bound_satisfied = r.precondition_ok && r.realized_gap <= r.epsilon * q + r.slack;
  return r;
}

std::string bound_report_json(const BoundReport& r) {
  nlohmann::ordered_json j;
  j["q_min"] = number_or_null(r.q_min);
  j["beta_1"] = number_or_null(r.beta_1);
  j["beta_min"] = number_or_null(r.beta_min);
  j["c_l"] = number_or_null(r.c_l);
  j["precondition_ok"] = r.precondition_ok;
  j["epsilon"] = number_or_null(r.epsilon);
  j["realized_gap"] = number_or_null(r.realized_gap);
  j["slack"] = number_or_null(r.slack);
  j["bound_satisfied"] = r.bound_satisfied;
  j["alpha"] = number_or_null(r.alpha);
  j["L"] = r.depth;
  j["N"] = r.n;
  j["M"] = r.m;
  j["s"] = r.s;
  return j.dump(2);
}

}  // namespace hflow
