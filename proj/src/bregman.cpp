#include "hflow/bregman.hpp"

#include <cmath>
#include <ostream>

#include "hflow/errors.hpp"
#include "hflow/io.hpp"

namespace hflow {

namespace {

double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }

void require_nonneg(const Vector& x, const char* what) {
  if ((x.array() < 0.0).any()) throw DomainError(std::string(what) + ": negative entry");
}

void require_interior(const Vector& x, const char* what) {
  if (!(x.array() > 0.0).all()) throw DomainError(std::string(what) + ": entries must be > 0");
}

// Single-coordinate divergence d(z, x), x > 0, z >= 0.
double coordinate_divergence(int depth, double z, double x) {
  if (depth == 2) {
    const double zlog = z == 0.0 ? 0.0 : z * std::log(z / x);
    return 0.5 * (zlog - z + x);
  }
  const double l = depth;
  const double q = 2.0 / l;
  const double xq = std::pow(x, q);
  const double zq = z == 0.0 ? 0.0 : std::pow(z, q);
  return ((l - 2.0) * xq + 2.0 * z * xq / x - l * zq) / (2.0 * (l - 2.0));
}

}  // namespace

Potential::Potential(int depth) : depth_(depth) {
  if (depth < 2) throw ArgumentError("Potential: depth must be >= 2");
}

double potential_value(const Potential& pot, const Vector& x) {
  require_nonneg(x, "potential_value");
  if (pot.depth() == 2) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) total += xlogx(x(i)) - x(i);
    return 0.5 * total;
  }
  const double l = pot.depth();
  return l / (2.0 * (2.0 - l)) * x.array().pow(2.0 / l).sum();
}

Vector potential_gradient(const Potential& pot, const Vector& x) {
  require_interior(x, "potential_gradient");
  if (pot.depth() == 2) return 0.5 * x.array().log().matrix();
  const double l = pot.depth();
  return (x.array().pow(2.0 / l - 1.0) / (2.0 - l)).matrix();
}

double bregman_divergence(const Potential& pot, const Vector& z, const Vector& x) {
  if (z.size() != x.size()) throw ArgumentError("bregman_divergence: length mismatch");
  require_interior(x, "bregman_divergence");
  require_nonneg(z, "bregman_divergence");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += coordinate_divergence(pot.depth(), z(i), x(i));
  return total;
}

double bregman_divergence_signed(const Potential& pot, const Vector& z, const Vector& u_tilde,
                                 const Vector& v_tilde) {
  return bregman_divergence(pot, positive_part(z), u_tilde) +
         bregman_divergence(pot, negative_part(z), v_tilde);
}

void check_reference(const Problem& p, const Vector& z, double tol) {
  if (z.size() != p.cols()) throw ArgumentError("reference solution has wrong length");
  const double res = (p.matrix() * z - p.measurements()).norm();
  if (!(res <= tol * std::max(1.0, p.measurements().norm()))) {
    throw InfeasibleReference("reference solution violates A z = y (residual " +
                              format_double(res) + ")");
  }
}

double dissipation_residual(const Problem& p, const Potential& pot, const Vector& z,
                            const ProductIterate& before, const ProductIterate& after,
                            double eta_effective) {
  if (!(eta_effective > 0.0)) throw ArgumentError("dissipation_residual: eta must be > 0");
  check_reference(p, z);
  const bool is_signed = before.u_tilde.size() > 0;
  double d_before = 0.0;
  double d_after = 0.0;
  if (is_signed) {
    d_before = bregman_divergence_signed(pot, z, before.u_tilde, before.v_tilde);
    d_after = bregman_divergence_signed(pot, z, after.u_tilde, after.v_tilde);
  } else {
    d_before = bregman_divergence(pot, z, before.x_tilde);
    d_after = bregman_divergence(pot, z, after.x_tilde);
  }
  const double loss_before = loss_quadratic(p, before.x_tilde);
  return (d_after - d_before) / eta_effective + 2.0 * pot.depth() * loss_before;
}

double g_value(const Vector& x0, const Vector& z, int depth) {
  if (depth < 2) throw ArgumentError("g_value: depth must be >= 2");
  if (x0.size() != z.size()) throw ArgumentError("g_value: length mismatch");
  require_interior(x0, "g_value");
  require_nonneg(z, "g_value");
  if (depth == 2) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      total += xlogx(z(i)) - z(i) - z(i) * std::log(x0(i));
    }
    return total;
  }
  const double l = depth;
  const double linear = z.dot(x0.array().pow(2.0 / l - 1.0).matrix());
  return linear - 0.5 * l * z.array().pow(2.0 / l).sum();
}

double g_tilde(double a, double b, int depth) {
  if (depth < 2) throw ArgumentError("g_tilde: depth must be >= 2");
  if (a < 0.0 || !(b > 0.0)) throw DomainError("g_tilde: need a >= 0 and b > 0");
  if (depth == 2) return a == 0.0 ? 0.0 : a * (std::log(a) - 1.0 - std::log(b));
  const double l = depth;
  return a - 0.5 * l * std::pow(a, 2.0 / l) * std::pow(b, 1.0 - 2.0 / l);
}

double solution_entropy(const Vector& z, const Vector& x) {
  if (z.size() != x.size()) throw ArgumentError("solution_entropy: length mismatch");
  require_interior(x, "solution_entropy");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    total += 0.5 * x(i) * x(i) - z(i) * std::log(x(i));
  }
  return total;
}

void write_diagnostics_csv(std::ostream& os, const FlowDiagnostics& diag) {
  os << "iter,loss";
  for (const auto& label : diag.reference_labels) os << ",df_" << label;
  os << ",dissipation_residual,product_l2\n";
  for (std::size_t k = 0; k < diag.size(); ++k) {
    os << diag.times[k] << ',' << format_double(diag.losses[k]);
    for (const auto& series : diag.bregman_to_refs) os << ',' << format_double(series[k]);
    os << ',' << format_double(diag.dissipation_residuals[k]) << ','
       << format_double(diag.product_norms[k]) << '\n';
  }
}

}  // namespace hflow
