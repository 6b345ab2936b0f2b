#include "hflow/flow.hpp"

#include <algorithm>
#include <cmath>

#include "hflow/errors.hpp"

namespace hflow {

namespace {

constexpr int kMaxShrinks = 60;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double ratio_or_inf(double num, double den) { return den > 0.0 ? num / den : kInf; }

// Loss after the trial step; factors are written into out_first/out_second.
double trial_loss(const Problem& p, const FactorState& state, const GradientEval& ev, double eta,
                  Vector& out_first, Vector& out_second) {
  const int depth = state.depth();
  out_first = state.first() - eta * ev.grad_first;
  Vector x_tilde = hadamard_ipow(out_first, depth);
  if (state.is_signed()) {
    out_second = state.second() - eta * ev.grad_second;
    x_tilde -= hadamard_ipow(out_second, depth);
  }
  return 0.5 * (p.matrix() * x_tilde - p.measurements()).squaredNorm();
}

bool trial_interior(const FactorState& state, const Vector& first, const Vector& second) {
  if (state.depth() < 2) return true;
  if (!(first.array() > 0.0).all()) return false;
  return !state.is_signed() || (second.array() > 0.0).all();
}

// Largest eta with |eta * grad_n| <= max_rel * factor_n for every entry.
double relative_change_cap(const FactorState& state, const GradientEval& ev, double max_rel) {
  if (std::isinf(max_rel) || state.depth() < 2) return kInf;
  double rate = (ev.grad_first.array() / state.first().array()).abs().maxCoeff();
  if (state.is_signed()) {
    rate = std::max(rate, (ev.grad_second.array() / state.second().array()).abs().maxCoeff());
  }
  return ratio_or_inf(max_rel, rate);
}

double max_relative_move(const FactorState& from, const FactorState& to) {
  double move = ((to.first() - from.first()).array() / from.first().array()).abs().maxCoeff();
  if (from.is_signed()) {
    move = std::max(move, ((to.second() - from.second()).array() / from.second().array()).abs().maxCoeff());
  }
  return move;
}

StepOutcome armijo_search(const Problem& p, const FactorState& state, const GradientEval& ev,
                          const StepPolicy& policy, double eta0) {
  const double gsq = ev.grad_norm_sq();
  if (!(gsq > 0.0)) throw PreconditionError("backtracking_step: gradient is zero");
  double eta = std::min(eta0, relative_change_cap(state, ev, policy.max_relative_change));
  Vector first;
  Vector second;
  for (int k = 0; k <= kMaxShrinks; ++k) {
    const double trial = trial_loss(p, state, ev, eta, first, second);
    if (trial_interior(state, first, second) && trial <= ev.loss - policy.armijo_c * eta * gsq) {
      FactorState next = state;
      next.first() = std::move(first);
      if (state.is_signed()) next.second() = std::move(second);
      return {std::move(next), eta, trial};
    }
    eta *= policy.shrink;
  }
  throw LineSearchFailure("backtracking_step: no acceptable step after 60 reductions");
}

SafeguardTerms safeguard_from_eval(const FactorState& state, const GradientEval& ev,
                                   const Vector& z) {
  const int depth = state.depth();
  const Vector& x = state.x();
  const Vector& g = ev.correlation;
  const Vector x_lm2 = hadamard_ipow(x, depth - 2);
  const Vector g_sq = g.cwiseProduct(g);
  SafeguardTerms t;
  t.loss = ev.loss;
  // Twice the largest |g_n x_n^(L-2)|: keeps the per-coordinate multiplier
  // 1 - eta g_n x_n^(L-2) within [1/2, 3/2].
  t.b1 = 2.0 * g.cwiseProduct(x_lm2).cwiseAbs().maxCoeff();
  t.b2 = g.cwiseProduct(hadamard_ipow(x, depth - 1)).squaredNorm();
  if (depth == 2) {
    t.b3 = z.dot(g_sq);
  } else {
    const double l = depth;
    t.b3 = 3.0 * (l - 2.0) * std::exp(l - 2.0) * z.dot(x_lm2.cwiseProduct(g_sq));
  }
  if (t.loss == 0.0) {
    t.eta_max = kInf;
  } else {
    t.eta_max = std::min({ratio_or_inf(1.0, t.b1), ratio_or_inf(t.loss, t.b2),
                          ratio_or_inf(t.loss, t.b3)});
  }
  return t;
}

void check_safeguard_inputs(const Problem& p, const FactorState& state, const Vector& z) {
  if (state.is_signed()) throw ModelMismatch("safeguard: requires the positive model");
  if (state.depth() < 2) throw ArgumentError("safeguard: depth must be >= 2");
  check_reference(p, z);
  if ((z.array() < 0.0).any()) throw DomainError("safeguard: reference solution must be >= 0");
}

class Recorder {
 public:
  Recorder(const Problem& p, const FactorState& init, const DiagnosticsConfig& cfg,
           const StopRule& stop)
      : p_(p), cfg_(cfg) {
    if (cfg.full_resolution) {
      cadence_ = 1;
    } else if (cfg.cadence > 0) {
      cadence_ = cfg.cadence;
    } else {
      cadence_ = std::max<long long>(1, (stop.max_iters + 1999) / 2000);
    }
    if (init.depth() >= 2) pot_.emplace(init.depth());
    for (const auto& [label, z] : cfg.references) {
      check_reference(p, z);
      if (!init.is_signed() && (z.array() < 0.0).any()) {
        throw DomainError("diagnostics: reference '" + label + "' must be >= 0");
      }
      diag_.reference_labels.push_back(label);
    }
    diag_.bregman_to_refs.resize(cfg.references.size());
  }

  bool due(long long iter) const { return iter % cadence_ == 0; }

  void sample(long long iter, double loss, const ProductIterate& prod) {
    diag_.times.push_back(iter);
    diag_.losses.push_back(loss);
    for (std::size_t r = 0; r < cfg_.references.size(); ++r) {
      diag_.bregman_to_refs[r].push_back(divergence(cfg_.references[r].second, prod));
    }
    diag_.dissipation_residuals.push_back(kNaN);
    diag_.product_norms.push_back(prod.x_tilde.norm());
  }

  // Residual of the step taken from the last sampled iterate.
  void complete_step(const ProductIterate& before, const ProductIterate& after, double eta) {
    if (cfg_.references.empty() || !pot_ || !interior(before) || !interior(after)) return;
    diag_.dissipation_residuals.back() =
        dissipation_residual(p_, *pot_, cfg_.references.front().second, before, after, eta);
  }

  bool last_is(long long iter) const { return !diag_.times.empty() && diag_.times.back() == iter; }

  FlowDiagnostics take() { return std::move(diag_); }

 private:
  static bool interior(const ProductIterate& prod) {
    if (prod.u_tilde.size() > 0) {
      return (prod.u_tilde.array() > 0.0).all() && (prod.v_tilde.array() > 0.0).all();
    }
    return (prod.x_tilde.array() > 0.0).all();
  }

  double divergence(const Vector& z, const ProductIterate& prod) const {
    if (!pot_ || !interior(prod)) return kNaN;
    if (prod.u_tilde.size() > 0) {
      return bregman_divergence_signed(*pot_, z, prod.u_tilde, prod.v_tilde);
    }
    return bregman_divergence(*pot_, z, prod.x_tilde);
  }

  const Problem& p_;
  const DiagnosticsConfig& cfg_;
  long long cadence_ = 1;
  std::optional<Potential> pot_;
  FlowDiagnostics diag_;
};

}  // namespace

StepPolicy StepPolicy::fixed(double eta) {
  StepPolicy s;
  s.kind = StepKind::Fixed;
  s.eta = eta;
  return s;
}

StepPolicy StepPolicy::backtracking(double eta0, double shrink, double growth, double armijo_c) {
  StepPolicy s;
  s.kind = StepKind::Backtracking;
  s.eta = eta0;
  s.shrink = shrink;
  s.growth = growth;
  s.armijo_c = armijo_c;
  return s;
}

StepPolicy StepPolicy::safeguarded(Vector z_ref, double eta_cap, double safety) {
  StepPolicy s;
  s.kind = StepKind::Safeguarded;
  s.eta = eta_cap;
  s.safety = safety;
  s.reference_solution = std::move(z_ref);
  return s;
}

void StepPolicy::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ArgumentError("StepPolicy: eta must be > 0");
  if (kind == StepKind::Backtracking) {
    if (!(shrink > 0.0 && shrink < 1.0)) throw ArgumentError("StepPolicy: shrink must be in (0,1)");
    if (!(growth > 1.0)) throw ArgumentError("StepPolicy: growth must be > 1");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
      throw ArgumentError("StepPolicy: armijo_c must be in (0,1)");
    }
    if (!(max_eta > 0.0)) throw ArgumentError("StepPolicy: max_eta must be > 0");
    if (!(max_relative_change > 0.0)) {
      throw ArgumentError("StepPolicy: max_relative_change must be > 0");
    }
  }
  if (kind == StepKind::Safeguarded) {
    if (!reference_solution) throw ArgumentError("StepPolicy: safeguarded step needs a reference");
    if (!(safety > 0.0 && safety <= 1.0)) throw ArgumentError("StepPolicy: safety must be in (0,1]");
  }
}

StopRule StopRule::defaults_for(const Problem& p) {
  StopRule s;
  s.loss_tol = 1e-14 * p.measurements().squaredNorm();
  return s;
}

void StopRule::validate() const {
  if (max_iters < 0) throw ArgumentError("StopRule: max_iters must be >= 0");
  if (loss_tol < 0.0 || grad_tol < 0.0) throw ArgumentError("StopRule: tolerances must be >= 0");
  if (stall_window < 0) throw ArgumentError("StopRule: stall_window must be >= 0");
  if (!(stall_state_rel >= 0.0)) throw ArgumentError("StopRule: stall_state_rel must be >= 0");
  if (!(divergence_ceiling > 0.0)) throw ArgumentError("StopRule: divergence_ceiling must be > 0");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::LossTol: return "loss_tol";
    case Termination::GradTol: return "grad_tol";
    case Termination::MaxIters: return "max_iters";
    case Termination::Stalled: return "stalled";
    case Termination::DivergenceGuard: return "divergence_guard";
  }
  return "unknown";
}

FlowResult run_flow(const Problem& p, const FactorState& init, const StepPolicy& policy,
                    const StopRule& stop, const std::optional<DiagnosticsConfig>& diag) {
  policy.validate();
  stop.validate();
  if (init.size() != p.cols()) throw ArgumentError("run_flow: state length does not match problem");
  if (!init.strictly_positive()) throw DomainError("run_flow: initialization must be > 0");
  if (policy.kind == StepKind::Safeguarded) {
    check_safeguard_inputs(p, init, *policy.reference_solution);
  }

  std::optional<Recorder> rec;
  if (diag) rec.emplace(p, init, *diag, stop);

  FactorState state = init;
  double next_eta = std::min(policy.eta, policy.max_eta);
  double last_eta = 0.0;
  double checkpoint = kInf;
  FactorState checkpoint_state = init;
  long long iter = 0;
  Termination why = Termination::MaxIters;
  GradientEval ev;

  for (;;) {
    evaluate_into(p, state, ev);
    const bool sampling = rec && rec->due(iter);
    ProductIterate before;
    if (sampling) {
      before = state.product();
      rec->sample(iter, ev.loss, before);
    }

    if (!std::isfinite(ev.loss) || !(ev.x_tilde.norm() <= stop.divergence_ceiling)) {
      why = Termination::DivergenceGuard;
      break;
    }
    if (ev.loss <= stop.loss_tol) {
      why = Termination::LossTol;
      break;
    }
    const double gsq = ev.grad_norm_sq();
    if (gsq == 0.0 || std::sqrt(gsq) <= stop.grad_tol) {
      why = Termination::GradTol;
      break;
    }
    if (iter >= stop.max_iters) {
      why = Termination::MaxIters;
      break;
    }
    if (stop.stall_window > 0 && iter % stop.stall_window == 0) {
      if (iter > 0 && checkpoint - ev.loss <= stop.stall_rel * checkpoint &&
          max_relative_move(checkpoint_state, state) <= stop.stall_state_rel) {
        why = Termination::Stalled;
        break;
      }
      checkpoint = ev.loss;
      checkpoint_state = state;
    }

    double eta = policy.eta;
    if (policy.kind == StepKind::Backtracking) {
      try {
        StepOutcome out = armijo_search(p, state, ev, policy, next_eta);
        state = std::move(out.state);
        eta = out.eta;
        next_eta = std::min(eta * policy.growth, policy.max_eta);
      } catch (const LineSearchFailure&) {
        why = Termination::Stalled;
        break;
      }
    } else {
      if (policy.kind == StepKind::Safeguarded) {
        const SafeguardTerms t = safeguard_from_eval(state, ev, *policy.reference_solution);
        eta = std::min(policy.eta, policy.safety * t.eta_max / state.depth());
      }
      state.first() -= eta * ev.grad_first;
      if (state.is_signed()) state.second() -= eta * ev.grad_second;
    }
    last_eta = eta;
    ++iter;
    if (sampling) rec->complete_step(before, state.product(), eta);
  }

  FlowResult result{state, state.product(), iter, ev.loss, why, last_eta, std::nullopt};
  if (rec) {
    if (!rec->last_is(iter)) rec->sample(iter, ev.loss, result.final_product);
    result.diagnostics = rec->take();
  }
  return result;
}

StepOutcome backtracking_step(const Problem& p, const FactorState& state, const StepPolicy& policy,
                              std::optional<double> eta0) {
  const double start = eta0.value_or(policy.eta);
  if (!(start > 0.0)) throw ArgumentError("backtracking_step: eta0 must be > 0");
  const GradientEval ev = evaluate(p, state);
  return armijo_search(p, state, ev, policy, start);
}

SafeguardTerms safeguard_terms(const Problem& p, const FactorState& state, const Vector& z_ref) {
  check_safeguard_inputs(p, state, z_ref);
  return safeguard_from_eval(state, evaluate(p, state), z_ref);
}

double safeguard_eta_max(const Problem& p, const FactorState& state, const Vector& z_ref) {
  return safeguard_terms(p, state, z_ref).eta_max;
}

}  // namespace hflow
