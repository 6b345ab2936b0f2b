#pragma once

#include <string>

#include "hflow/core.hpp"

namespace hflow {

// Initialization-induced weights: gamma = 1 - 2/L, w+ = u~(0)^(-gamma),
// w- = v~(0)^(-gamma). The positive-model variant sets w- = w+.
struct WeightSpec {
  double gamma = 0.0;
  Vector w_plus;
  Vector w_minus;
};

WeightSpec make_weights(const Vector& init_u_tilde, const Vector& init_v_tilde, int depth);
WeightSpec make_weights_positive(const Vector& init_x_tilde, int depth);

struct BetaStats {
  double beta_1 = 0.0;
  double beta_min = 0.0;
};

// beta_1 = ||u~(0)||_{w+,1} + ||v~(0)||_{w-,1};
// beta_min = min over n of min(w+_n u~_n(0), w-_n v~_n(0)).
BetaStats beta_stats(const Vector& init_u_tilde, const Vector& init_v_tilde, const WeightSpec& ws);
// beta_1 = ||x~(0)||_{w,1}, beta_min = min_n w_n x~_n(0).
BetaStats beta_stats_positive(const Vector& init_x_tilde, const WeightSpec& ws);

// 1 for L = 2, (L/2)^(L/(L-2)) for L > 2.
double c_l(int depth);

// True when Q > c_L beta_1^(2/L) and the epsilon denominator is positive
// (for L > 2 the latter is Q > c_L beta_1).
bool bound_precondition(double q, double beta_1, int depth);

// L = 2 : log(beta_1 / beta_min) / log(Q / beta_1)
// L > 2 : L (beta_1^g - beta_min^g) / (2 Q^g - L beta_1^g),  g = 1 - 2/L
// Throws PreconditionFailed when bound_precondition is false and
// DegenerateInput when beta_min > beta_1.
double epsilon_bound(double q, double beta_1, double beta_min, int depth);

// The same closed form without the precondition check.
double epsilon_formula(double q, double beta_1, double beta_min, int depth);

// ||x_limit||_{(w+,w-),1} - Q
double realized_gap(const Vector& x_limit, const WeightSpec& ws, double q);

// Rescales (u0, v0, y) by (lambda, lambda, lambda^L). Weights are recomputed
// from the scaled initialization, so beta_1, beta_min and Q all pick up the
// common factor lambda^L * lambda^(-L gamma). Q is scaled analytically.
// Returns true iff epsilon agrees before and after to 1e-12 relative.
bool scale_invariance_check(const Vector& u0, const Vector& v0, double q, double lambda,
                            int depth);

// Sum of the N - s smallest magnitudes of x.
double best_s_term_error(const Vector& x, int s);

// (1 + rho) / (1 - rho) * (epsilon ||x*||_1 + 2 sigma_s(x*)_1)
double nsp_error_bound(double epsilon, double x_star_l1, double sigma_s, double rho);

struct BoundReport {
  double q_min = 0.0;
  double beta_1 = 0.0;
  double beta_min = 0.0;
  double c_l = 0.0;
  bool precondition_ok = false;
  double epsilon = 0.0;  // NaN when the precondition fails
  double realized_gap = 0.0;
  double slack = 0.0;
  bool bound_satisfied = false;
  // Inputs echoed into the JSON record.
  double alpha = 0.0;
  int depth = 0;
  int n = 0;
  int m = 0;
  int s = 0;
};

// Assembles the report. bound_satisfied uses
// slack = max(1e-8, 10 * baseline_tol) * Q.
BoundReport make_bound_report(double q, const BetaStats& beta, int depth, const Vector& x_limit,
                              const WeightSpec& ws, double baseline_tol);

std::string bound_report_json(const BoundReport& report);

}  // namespace hflow
