#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hflow/bregman.hpp"
#include "hflow/core.hpp"
#include "hflow/model.hpp"

namespace hflow {

enum class StepKind { Fixed, Backtracking, Safeguarded };

struct StepPolicy {
  StepKind kind = StepKind::Fixed;
  double eta = 1e-2;  // fixed step, initial trial step, or safeguard cap
  double shrink = 0.5;
  double growth = 2.0;
  double armijo_c = 1e-4;
  double max_eta = std::numeric_limits<double>::infinity();
  // Backtracking: the trial step is also capped so that no factor entry moves
  // by more than this fraction of itself, which keeps the iterates close to
  // the continuous flow through the escape from a small initialization.
  double max_relative_change = std::numeric_limits<double>::infinity();
  // Safeguarded: fraction of the admissible step actually taken.
  double safety = 0.9;
  std::optional<Vector> reference_solution;

  static StepPolicy fixed(double eta);
  static StepPolicy backtracking(double eta0, double shrink = 0.5, double growth = 2.0,
                                 double armijo_c = 1e-4);
  static StepPolicy safeguarded(Vector z_ref, double eta_cap = 1.0, double safety = 0.9);

  // Throws ArgumentError when a parameter is outside its range.
  void validate() const;
};

struct StopRule {
  long long max_iters = 10'000'000;
  double loss_tol = 0.0;
  double grad_tol = 0.0;
  long long stall_window = 10'000;  // 0 disables stall detection
  double stall_rel = 1e-12;
  // A window only counts as a stall if no factor entry moved by more than this
  // fraction of itself. Keeps slow escapes from a small init from stopping.
  double stall_state_rel = 1e-9;
  double divergence_ceiling = 1e12;

  // loss_tol = 1e-14 ||y||^2 with the remaining defaults.
  static StopRule defaults_for(const Problem& p);
  void validate() const;
};

enum class Termination { LossTol, GradTol, MaxIters, Stalled, DivergenceGuard };

std::string to_string(Termination t);

struct DiagnosticsConfig {
  // Reference solutions (label, z). The first one drives the dissipation residual.
  std::vector<std::pair<std::string, Vector>> references;
  long long cadence = 0;  // 0: ceil(max_iters / 2000)
  bool full_resolution = false;
};

struct FlowResult {
  FactorState final_state;
  ProductIterate final_product;
  long long iterations = 0;
  double terminal_loss = 0.0;
  Termination termination = Termination::MaxIters;
  double last_eta = 0.0;
  std::optional<FlowDiagnostics> diagnostics;

  bool converged() const {
    return termination == Termination::LossTol || termination == Termination::GradTol;
  }
};

// Gradient descent on the reduced (positive) or signed loss until a stop rule
// fires. Iteration 0 is checked before any step is taken.
FlowResult run_flow(const Problem& p, const FactorState& init, const StepPolicy& policy,
                    const StopRule& stop,
                    const std::optional<DiagnosticsConfig>& diag = std::nullopt);

struct StepOutcome {
  FactorState state;
  double eta = 0.0;
  double loss = 0.0;  // loss at the accepted point
};

// Armijo backtracking from eta0 (defaults to policy.eta). For depth >= 2 a
// trial that leaves the positive orthant is rejected like an Armijo failure.
// Throws PreconditionError on a zero gradient and LineSearchFailure after 60
// reductions.
StepOutcome backtracking_step(const Problem& p, const FactorState& state, const StepPolicy& policy,
                              std::optional<double> eta0 = std::nullopt);

// The three terms of the gradient-descent step-size condition, evaluated for
// the per-factor flow (no leading factor L).
struct SafeguardTerms {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double loss = 0.0;
  double eta_max = 0.0;  // min(1/B1, loss/B2, loss/B3)
};

SafeguardTerms safeguard_terms(const Problem& p, const FactorState& state, const Vector& z_ref);

// Positive model only. +inf when the loss is zero.
double safeguard_eta_max(const Problem& p, const FactorState& state, const Vector& z_ref);

}  // namespace hflow
