#include "hflow/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "hflow/baselines.hpp"
#include "hflow/bounds.hpp"
#include "hflow/errors.hpp"
#include "hflow/flow.hpp"
#include "hflow/io.hpp"

namespace hflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs task(i) for i in [0, count) on `workers` threads. Tasks write to
// disjoint slots, so the schedule never affects the results.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct TrialOutcome {
  bool ok = false;
  double rel_error = kNaN;
  double iterations = 0.0;
};

double rel_error(const Vector& x_hat, const Vector& x_star) {
  return (x_hat - x_star).norm() / x_star.norm();
}

StopRule flow_stop(const Problem& p, long long max_iters) {
  StopRule stop = StopRule::defaults_for(p);
  stop.max_iters = max_iters;
  return stop;
}

FactorState uniform_init(Eigen::Index n, double alpha, int depth, bool signed_values) {
  return signed_values ? FactorState::uniform_signed(n, alpha, depth)
                       : FactorState::uniform_positive(n, alpha, depth);
}

TrialOutcome run_solver(const SolverSpec& solver, const PhaseConfig& cfg, const Instance& inst) {
  const Problem& p = inst.problem;
  TrialOutcome out;
  try {
    if (solver.depth == 0) {
      const BpResult r = basis_pursuit(p);
      out.rel_error = rel_error(r.z_hat, inst.truth.x_star);
      out.iterations = static_cast<double>(r.iterations);
    } else if (solver.depth == 1) {
      const GdResult r = gd_quadratic_until(p, cfg.eta, cfg.max_iters,
                                            1e-14 * p.measurements().squaredNorm());
      out.rel_error = rel_error(r.x, inst.truth.x_star);
      out.iterations = static_cast<double>(r.iterations);
    } else {
      // Fixed horizon: the early plateau of a small initialization is not a stall.
      StopRule stop = flow_stop(p, cfg.max_iters);
      stop.stall_window = 0;
      const FlowResult r = run_flow(p, uniform_init(p.cols(), cfg.alpha, solver.depth, cfg.signed_values),
                                    StepPolicy::fixed(cfg.eta), stop);
      if (r.termination == Termination::DivergenceGuard) return out;
      out.rel_error = rel_error(r.final_product.x_tilde, inst.truth.x_star);
      out.iterations = static_cast<double>(r.iterations);
    }
    out.ok = std::isfinite(out.rel_error);
  } catch (const Error&) {
    out = TrialOutcome{};
  }
  return out;
}

void require_16bit(int v, const char* what) {
  if (v < 0 || v > 0xFFFF) {
    throw ArgumentError(std::string("seed_for_trial: ") + what + " must be in [0, 65535]");
  }
}

void require_alpha_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ArgumentError("alpha_grid must be non-empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ArgumentError("alpha_grid entries must be > 0");
    if (i > 0 && !(grid[i] < grid[i - 1])) {
      throw ArgumentError("alpha_grid must be strictly descending");
    }
  }
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> out;
  for (int v = lo; v <= hi; ++v) out.push_back(v);
  return out;
}

}  // namespace

Rng seed_for_trial(std::uint64_t base_seed, ExperimentTag tag, int m, int s, int trial) {
  require_16bit(m, "m");
  require_16bit(s, "s");
  require_16bit(trial, "trial");
  const std::uint64_t id = (static_cast<std::uint64_t>(tag) << 48) |
                           (static_cast<std::uint64_t>(m) << 32) |
                           (static_cast<std::uint64_t>(s) << 16) | static_cast<std::uint64_t>(trial);
  return Rng(base_seed, id);
}

Instance draw_instance(int n, int m, int s, bool signed_values, Rng& rng) {
  Matrix a = gaussian_sensing_matrix(m, n, rng);
  GroundTruth truth = sparse_ground_truth(n, s, signed_values, rng);
  Vector y = a * truth.x_star;
  return Instance{Problem(std::move(a), std::move(y)), std::move(truth)};
}

int resolve_workers(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(n, 1);
  if (const char* env = std::getenv("HFLOW_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

SolverSpec parse_solver(const std::string& tag) {
  if (tag == "bp") return {tag, 0};
  if (tag.rfind("gd_L", 0) == 0 && tag.size() > 4) {
    const std::string digits = tag.substr(4);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
        digits.size() <= 2) {
      const int depth = std::stoi(digits);
      if (depth >= 1) return {tag, depth};
    }
  }
  throw ArgumentError("unknown solver tag '" + tag + "' (expected bp, gd_L1, gd_L2, ...)");
}

void PhaseConfig::validate() const {
  if (n < 1) throw ArgumentError("phase: n must be >= 1");
  if (m_values.empty() || s_values.empty()) throw ArgumentError("phase: empty m or s grid");
  for (int m : m_values) {
    if (m < 1 || m > n) throw ArgumentError("phase: m values must lie in [1, n]");
  }
  for (int s : s_values) {
    if (s < 1 || s > n) throw ArgumentError("phase: s values must lie in [1, n]");
  }
  if (trials < 1) throw ArgumentError("phase: trials must be >= 1");
  if (solvers.empty()) throw ArgumentError("phase: no solvers");
  for (const auto& tag : solvers) parse_solver(tag);
  if (!(alpha > 0.0)) throw ArgumentError("phase: alpha must be > 0");
  if (!(eta > 0.0)) throw ArgumentError("phase: eta must be > 0");
  if (max_iters < 1) throw ArgumentError("phase: max_iters must be >= 1");
  if (!(success_rel_tol > 0.0 && success_rel_tol < 1.0)) {
    throw ArgumentError("phase: success_rel_tol must lie in (0, 1)");
  }
}

PhaseConfig PhaseConfig::desk(bool paper_faithful) {
  PhaseConfig cfg;
  cfg.m_values = range(1, 20);
  cfg.s_values = range(1, 6);
  if (paper_faithful) {
    cfg.alpha = 1e-6;
    cfg.max_iters = 10'000'000;
  }
  return cfg;
}

std::vector<PhaseCell> run_phase_diagram(const PhaseConfig& cfg, int workers) {
  cfg.validate();
  std::vector<SolverSpec> solvers;
  for (const auto& tag : cfg.solvers) solvers.push_back(parse_solver(tag));

  const std::size_t n_m = cfg.m_values.size();
  const std::size_t n_s = cfg.s_values.size();
  const auto n_t = static_cast<std::size_t>(cfg.trials);
  // outcomes[((mi * n_s + si) * n_t + t) * n_solvers + k]
  std::vector<TrialOutcome> outcomes(n_m * n_s * n_t * solvers.size());

  parallel_for(n_m * n_s * n_t, resolve_workers(workers), [&](std::size_t task) {
    const std::size_t t = task % n_t;
    const std::size_t si = (task / n_t) % n_s;
    const std::size_t mi = task / (n_t * n_s);
    const int m = cfg.m_values[mi];
    const int s = cfg.s_values[si];
    std::optional<Instance> inst;
    try {
      Rng rng = seed_for_trial(cfg.base_seed, ExperimentTag::Phase, m, s, static_cast<int>(t));
      inst = draw_instance(cfg.n, m, s, cfg.signed_values, rng);
    } catch (const Error&) {
      return;
    }
    for (std::size_t k = 0; k < solvers.size(); ++k) {
      outcomes[task * solvers.size() + k] = run_solver(solvers[k], cfg, *inst);
    }
  });

  std::vector<PhaseCell> cells;
  cells.reserve(n_m * n_s * solvers.size());
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    for (std::size_t si = 0; si < n_s; ++si) {
      for (std::size_t k = 0; k < solvers.size(); ++k) {
        PhaseCell cell;
        cell.m = cfg.m_values[mi];
        cell.s = cfg.s_values[si];
        cell.solver_tag = solvers[k].tag;
        cell.trials = cfg.trials;
        double err_sum = 0.0;
        double iter_sum = 0.0;
        int ok = 0;
        for (std::size_t t = 0; t < n_t; ++t) {
          const TrialOutcome& o = outcomes[((mi * n_s + si) * n_t + t) * solvers.size() + k];
          if (!o.ok) continue;
          ++ok;
          err_sum += o.rel_error;
          iter_sum += o.iterations;
          if (o.rel_error <= cfg.success_rel_tol) ++cell.success_count;
        }
        cell.mean_rel_error = ok > 0 ? err_sum / ok : kNaN;
        cell.mean_iterations = ok > 0 ? iter_sum / ok : kNaN;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

void write_phase_csv(std::ostream& os, const std::vector<PhaseCell>& cells) {
  os << "m,s,solver,trials,successes,mean_rel_error,mean_iters\n";
  for (const auto& c : cells) {
    os << c.m << ',' << c.s << ',' << c.solver_tag << ',' << c.trials << ',' << c.success_count << ','
       << format_double(c.mean_rel_error) << ',' << format_double(c.mean_iterations) << '\n';
  }
}

std::optional<int> success_boundary(const std::vector<PhaseCell>& cells, const std::string& solver,
                                    int s, double min_rate) {
  std::map<int, double> rate;
  for (const auto& c : cells) {
    if (c.solver_tag == solver && c.s == s) rate[c.m] = c.success_rate();
  }
  std::optional<int> boundary;
  for (auto it = rate.rbegin(); it != rate.rend(); ++it) {
    if (it->second < min_rate) break;
    boundary = it->first;
  }
  return boundary;
}

void ScalingConfig::validate() const {
  if (n < 1 || m < 1 || m > n || s < 1 || s > n) {
    throw ArgumentError("scaling: need 1 <= m <= n and 1 <= s <= n");
  }
  if (depth_list.empty()) throw ArgumentError("scaling: empty depth list");
  for (int d : depth_list) {
    if (d < 2) throw ArgumentError("scaling: depths must be >= 2");
  }
  require_alpha_grid(alpha_grid);
  if (trials < 1) throw ArgumentError("scaling: trials must be >= 1");
  if (!(eta0 > 0.0)) throw ArgumentError("scaling: eta0 must be > 0");
  if (!(max_relative_change > 0.0)) throw ArgumentError("scaling: max_relative_change must be > 0");
  if (max_iters < 1) throw ArgumentError("scaling: max_iters must be >= 1");
}

ScalingConfig ScalingConfig::desk(bool paper_faithful) {
  ScalingConfig cfg;
  // Narrow on purpose: below about 0.08 the depth-4 tail needs far more than
  // max_iters to reach the loss tolerance.
  cfg.max_iters = 5'000'000;
  cfg.alpha_grid = {std::pow(10.0, -0.8), std::pow(10.0, -0.9), 1e-1, std::pow(10.0, -1.05),
                    std::pow(10.0, -1.1)};
  if (paper_faithful) {
    cfg.n = 1000;
    cfg.m = 150;
    cfg.alpha_grid = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  }
  return cfg;
}

namespace {

struct ScalingTrial {
  bool ok = false;
  double rel_gap = kNaN;
  double epsilon = kNaN;
  bool precondition_ok = false;
};

ScalingTrial scaling_trial(const ScalingConfig& cfg, int depth, double alpha, int trial) {
  ScalingTrial out;
  try {
    Rng rng = seed_for_trial(cfg.base_seed, ExperimentTag::Scaling, cfg.m, cfg.s, trial);
    const Instance inst = draw_instance(cfg.n, cfg.m, cfg.s, true, rng);
    const Problem& p = inst.problem;
    const FactorState init = FactorState::uniform_signed(p.cols(), alpha, depth);
    const ProductIterate init_prod = init.product();
    const WeightSpec ws = make_weights(init_prod.u_tilde, init_prod.v_tilde, depth);
    const BetaStats beta = beta_stats(init_prod.u_tilde, init_prod.v_tilde, ws);

    // Uniform weights are a constant multiple of the plain l1 norm, so the
    // relative gap is measured unweighted, where BP is well scaled for any alpha.
    const BpResult bp = basis_pursuit(p, BpConfig{});
    const double q_plain = bp.l1_value;
    const double q = signed_weighted_l1(bp.z_hat, ws.w_plus, ws.w_minus);

    // Small inits escape coordinate by coordinate with long flat stretches in
    // between, so only the iteration cap ends a run early. The default loss
    // tolerance resolves the relative gap to about 1e-6.
    StopRule stop = flow_stop(p, cfg.max_iters);
    stop.stall_window = 0;
    StepPolicy policy = StepPolicy::backtracking(cfg.eta0);
    policy.max_relative_change = cfg.max_relative_change;
    const FlowResult r = run_flow(p, init, policy, stop);
    if (!r.converged()) return out;

    out.rel_gap = (r.final_product.x_tilde.lpNorm<1>() - q_plain) / q_plain;
    out.precondition_ok = bound_precondition(q, beta.beta_1, depth);
    if (out.precondition_ok) out.epsilon = epsilon_bound(q, beta.beta_1, beta.beta_min, depth);
    out.ok = std::isfinite(out.rel_gap);
  } catch (const Error&) {
    out = ScalingTrial{};
  }
  return out;
}

}  // namespace

std::vector<ScalingRow> run_scaling(const ScalingConfig& cfg, int workers) {
  cfg.validate();
  const std::size_t n_d = cfg.depth_list.size();
  const std::size_t n_a = cfg.alpha_grid.size();
  const auto n_t = static_cast<std::size_t>(cfg.trials);
  std::vector<ScalingTrial> trials(n_d * n_a * n_t);

  parallel_for(trials.size(), resolve_workers(workers), [&](std::size_t task) {
    const std::size_t t = task % n_t;
    const std::size_t ai = (task / n_t) % n_a;
    const std::size_t di = task / (n_t * n_a);
    trials[task] = scaling_trial(cfg, cfg.depth_list[di], cfg.alpha_grid[ai], static_cast<int>(t));
  });

  std::vector<ScalingRow> rows;
  for (std::size_t di = 0; di < n_d; ++di) {
    for (std::size_t ai = 0; ai < n_a; ++ai) {
      ScalingRow row;
      row.depth = cfg.depth_list[di];
      row.alpha = cfg.alpha_grid[ai];
      row.precondition_ok = true;
      double gap_sum = 0.0;
      double eps_sum = 0.0;
      int ok = 0;
      for (std::size_t t = 0; t < n_t; ++t) {
        const ScalingTrial& tr = trials[(di * n_a + ai) * n_t + t];
        if (!tr.ok) {
          ++row.failed_trials;
          continue;
        }
        ++ok;
        gap_sum += tr.rel_gap;
        eps_sum += tr.epsilon;
        row.precondition_ok = row.precondition_ok && tr.precondition_ok;
      }
      row.rel_gap = ok > 0 ? gap_sum / ok : kNaN;
      row.precondition_ok = row.precondition_ok && ok > 0;
      row.predicted_epsilon = row.precondition_ok ? eps_sum / ok : kNaN;
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

// NaN instead of an exception for too few or degenerate samples.
double guarded(double (*stat)(const std::vector<double>&, const std::vector<double>&),
               const std::vector<double>& xs, const std::vector<double>& ys) {
  try {
    return stat(xs, ys);
  } catch (const Error&) {
    return kNaN;
  }
}

}  // namespace

std::vector<ScalingSummary> summarize_scaling(const std::vector<ScalingRow>& rows) {
  std::map<int, std::vector<const ScalingRow*>> by_depth;
  for (const auto& r : rows) by_depth[r.depth].push_back(&r);
  std::vector<ScalingSummary> out;
  for (auto& [depth, list] : by_depth) {
    std::sort(list.begin(), list.end(),
              [](const ScalingRow* a, const ScalingRow* b) { return a->alpha < b->alpha; });
    std::vector<double> xs;
    std::vector<double> ys;
    if (depth == 2) {
      for (const auto* r : list) {
        if (r->alpha >= 1.0) continue;
        xs.push_back(1.0 / std::log(1.0 / r->alpha));
        ys.push_back(r->rel_gap);
      }
      out.push_back({depth, "corr_inv_log", guarded(correlation, xs, ys)});
    } else {
      for (std::size_t i = 0; i < std::min<std::size_t>(3, list.size()); ++i) {
        xs.push_back(std::log(list[i]->alpha));
        ys.push_back(std::log(list[i]->rel_gap));
      }
      out.push_back({depth, "slope_smallest3", guarded(fit_slope, xs, ys)});
    }
  }
  return out;
}

void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << "L,alpha,rel_gap,predicted_epsilon,precondition_ok\n";
  for (const auto& r : rows) {
    os << r.depth << ',' << format_double(r.alpha) << ',' << format_double(r.rel_gap) << ','
       << format_double(r.predicted_epsilon) << ',' << (r.precondition_ok ? 1 : 0) << '\n';
  }
  for (const auto& s : summarize_scaling(rows)) {
    os << "# L=" << s.depth << ',' << s.statistic << ',' << format_double(s.value) << '\n';
  }
}

void NoiseConfig::validate() const {
  if (n < 1 || m < 1 || m > n || s < 1 || s > n) {
    throw ArgumentError("noise: need 1 <= m <= n and 1 <= s <= n");
  }
  if (depth < 2) throw ArgumentError("noise: depth must be >= 2");
  if (noise_levels.empty()) throw ArgumentError("noise: no noise levels");
  for (double v : noise_levels) {
    if (!(v >= 0.0)) throw ArgumentError("noise: noise levels must be >= 0");
  }
  if (trials < 1) throw ArgumentError("noise: trials must be >= 1");
  if (!(alpha > 0.0) || !(eta0 > 0.0)) throw ArgumentError("noise: alpha and eta0 must be > 0");
  if (!(max_relative_change > 0.0)) throw ArgumentError("noise: max_relative_change must be > 0");
  if (max_iters < 1) throw ArgumentError("noise: max_iters must be >= 1");
}

NoiseConfig NoiseConfig::desk() {
  NoiseConfig cfg;
  cfg.noise_levels = {0.0, 0.01, 0.02, 0.04, 0.08};
  return cfg;
}

std::vector<NoiseRecord> run_noise(const NoiseConfig& cfg, int workers) {
  cfg.validate();
  const std::size_t n_l = cfg.noise_levels.size();
  const auto n_t = static_cast<std::size_t>(cfg.trials);
  std::vector<NoiseRecord> records(n_l * n_t);

  parallel_for(records.size(), resolve_workers(workers), [&](std::size_t task) {
    const std::size_t t = task % n_t;
    const double level = cfg.noise_levels[task / n_t];
    NoiseRecord& rec = records[task];
    rec.noise_l2 = level;
    rec.trial = static_cast<int>(t);
    rec.rel_error_l2 = kNaN;
    try {
      Rng rng = seed_for_trial(cfg.base_seed, ExperimentTag::Noise, cfg.m, cfg.s, rec.trial);
      const Instance inst = draw_instance(cfg.n, cfg.m, cfg.s, cfg.signed_values, rng);
      Rng noise_rng = rng.split(1);
      Vector e(cfg.m);
      for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = noise_rng.normal();
      e *= level / e.norm();
      const Problem p = inst.problem.with_measurements(inst.problem.measurements() + e);
      StepPolicy policy = StepPolicy::backtracking(cfg.eta0);
      policy.max_relative_change = cfg.max_relative_change;
      const FlowResult r = run_flow(p, uniform_init(p.cols(), cfg.alpha, cfg.depth, cfg.signed_values),
                                    policy, flow_stop(p, cfg.max_iters));
      if (r.termination != Termination::DivergenceGuard) {
        rec.rel_error_l2 = rel_error(r.final_product.x_tilde, inst.truth.x_star);
      }
    } catch (const Error&) {
      rec.rel_error_l2 = kNaN;
    }
  });
  return records;
}

std::vector<NoiseMean> noise_means(const std::vector<NoiseRecord>& records) {
  std::vector<NoiseMean> out;
  std::vector<int> counts;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const NoiseMean& nm) { return nm.noise_l2 == r.noise_l2; });
    if (it == out.end()) {
      out.push_back({r.noise_l2, 0.0});
      counts.push_back(0);
      it = out.end() - 1;
    }
    if (!std::isfinite(r.rel_error_l2)) continue;
    it->mean_error += r.rel_error_l2;
    ++counts[static_cast<std::size_t>(it - out.begin())];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].mean_error = counts[i] > 0 ? out[i].mean_error / counts[i] : kNaN;
  }
  return out;
}

void write_noise_csv(std::ostream& os, const std::vector<NoiseRecord>& records) {
  os << "noise_l2,trial,rel_error_l2\n";
  for (const auto& r : records) {
    os << format_double(r.noise_l2) << ',' << r.trial << ',' << format_double(r.rel_error_l2) << '\n';
  }
}

namespace {

void require_pairs(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ArgumentError("regression: need two or more paired samples");
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  require_pairs(xs, ys);
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw DegenerateInput("regression: xs are all equal");
  return sxy / sxx;
}

double fit_intercept(const std::vector<double>& xs, const std::vector<double>& ys) {
  return mean(ys) - fit_slope(xs, ys) * mean(xs);
}

double correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  require_pairs(xs, ys);
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("correlation: constant sample");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace hflow
