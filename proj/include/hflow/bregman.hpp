#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hflow/core.hpp"
#include "hflow/model.hpp"

namespace hflow {

// Mirror potential attached to depth L >= 2:
//   L = 2 : F(x) = 1/2 sum x log x - x        (0 log 0 := 0)
//   L > 2 : F(x) = L / (2 (2 - L)) sum x^(2/L)
class Potential {
 public:
  explicit Potential(int depth);
  int depth() const { return depth_; }

 private:
  int depth_;
};

double potential_value(const Potential& pot, const Vector& x);

// Requires x > 0.
Vector potential_gradient(const Potential& pot, const Vector& x);

// D_F(z, x) = F(z) - F(x) - <grad F(x), z - x>; z >= 0, x > 0.
// Evaluated coordinate-wise in closed form, each term is non-negative.
double bregman_divergence(const Potential& pot, const Vector& z, const Vector& x);

// D_{F+-}((z+, z-), (u~, v~)) = D_F(z+, u~) + D_F(z-, v~), with z+ and z- the
// positive and negative parts of the signed vector z.
double bregman_divergence_signed(const Potential& pot, const Vector& z, const Vector& u_tilde,
                                 const Vector& v_tilde);

// Discrete defect of d/dt D_F(z, x~(t)) = -2 L loss(t):
//   [D_F(z, after) - D_F(z, before)] / eta + 2 L * 1/2 ||A before - y||^2
// Positive model uses x_tilde; signed model uses (u_tilde, v_tilde).
double dissipation_residual(const Problem& p, const Potential& pot, const Vector& z,
                            const ProductIterate& before, const ProductIterate& after,
                            double eta_effective);

// Throws InfeasibleReference when ||A z - y|| > tol.
void check_reference(const Problem& p, const Vector& z, double tol = 1e-8);

// Limit functional whose minimizer over the non-negative solutions is the flow limit:
//   L = 2 : <z, log z - 1 - log x0>
//   L > 2 : <z, x0^(2/L - 1)> - (L/2) ||z||_{2/L}^{2/L}
double g_value(const Vector& x0, const Vector& z, int depth);

// Scalar comparison function: a (log a - 1 - log b) for L = 2,
// a - (L/2) a^(2/L) b^(1 - 2/L) for L > 2.
double g_tilde(double a, double b, int depth);

// sum 1/2 x_n^2 - z_n log x_n  (depth-2 Lyapunov function, equals D_F(z, x^2) + const).
double solution_entropy(const Vector& z, const Vector& x);

// Time series recorded by the flow integrator. All series share one length.
struct FlowDiagnostics {
  std::vector<long long> times;
  std::vector<double> losses;
  std::vector<std::string> reference_labels;
  std::vector<std::vector<double>> bregman_to_refs;  // [ref][sample]
  std::vector<double> dissipation_residuals;
  std::vector<double> product_norms;

  std::size_t size() const { return times.size(); }
};

// Columns: iter,loss,df_<label>...,dissipation_residual,product_l2
void write_diagnostics_csv(std::ostream& os, const FlowDiagnostics& diag);

}  // namespace hflow
