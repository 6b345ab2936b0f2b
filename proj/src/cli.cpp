#include "hflow/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>

#include "hflow/baselines.hpp"
#include "hflow/bounds.hpp"
#include "hflow/errors.hpp"
#include "hflow/experiments.hpp"
#include "hflow/flow.hpp"
#include "hflow/io.hpp"
#include "hflow/verify.hpp"

#ifndef HFLOW_VERSION
#define HFLOW_VERSION "0.0.0"
#endif

namespace hflow {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::system_clock;

std::string iso_utc(Clock::time_point t) {
  const std::time_t tt = Clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects what a run did and writes manifest.json next to its outputs.
class Manifest {
 public:
  Manifest(std::string command, std::string out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)), started_(Clock::now()) {}

  Json& config() { return config_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  std::string output(const std::string& name) {
    const std::string path = (std::filesystem::path(out_dir_) / name).string();
    outputs_.push_back(path);
    return path;
  }

  void write() const {
    const auto finished = Clock::now();
    Json j;
    j["command"] = command_;
    j["config"] = config_;
    j["base_seed"] = seed_;
    j["artifact_version"] = HFLOW_VERSION;
    j["started_at"] = iso_utc(started_);
    j["finished_at"] = iso_utc(finished);
    j["wall_seconds"] = std::chrono::duration<double>(finished - started_).count();
    j["outputs"] = outputs_;
    std::ofstream f(std::filesystem::path(out_dir_) / "manifest.json");
    if (!f) throw Error("cannot write manifest in " + out_dir_);
    f << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::string out_dir_;
  Clock::time_point started_;
  Json config_ = Json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::string> outputs_;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  return f;
}

// ---- solve -----------------------------------------------------------------

struct SolveArgs {
  int n = 0;
  int m = 0;
  int s = 0;
  std::uint64_t seed = 1;
  bool signed_model = false;
  int depth = 0;
  double alpha = 1e-3;
  double eta = 1e-2;
  std::string step = "backtracking";
  double max_rel_change = 0.1;
  long long max_iters = 10'000'000;
  double loss_tol = -1.0;  // negative: 1e-14 ||y||^2
  std::string a_path;
  std::string y_path;
  std::string out_dir = ".";
  bool bounds = false;
  long long diag_every = 100;
};

StepPolicy make_policy(const SolveArgs& a, const std::optional<Vector>& reference) {
  if (a.step == "fixed") return StepPolicy::fixed(a.eta);
  if (a.step == "backtracking") {
    StepPolicy policy = StepPolicy::backtracking(a.eta);
    policy.max_relative_change = a.max_rel_change;
    return policy;
  }
  if (!reference) throw ArgumentError("safeguarded steps need a non-negative reference solution");
  return StepPolicy::safeguarded(*reference, a.eta);
}

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  if (a.depth < 1) throw ArgumentError("--L must be >= 1");
  if (a.depth == 1 && a.bounds) throw ArgumentError("--bounds requires L >= 2");
  const bool from_files = !a.a_path.empty() || !a.y_path.empty();
  if (from_files && (a.a_path.empty() || a.y_path.empty())) {
    throw ArgumentError("--A and --y must be given together");
  }
  if (!from_files && (a.n < 1 || a.m < 1 || a.s < 1)) {
    throw ArgumentError("give --n, --m and --s, or --A and --y");
  }

  ensure_dir(a.out_dir);
  Manifest manifest("solve", a.out_dir);
  manifest.set_seed(a.seed);
  Json& cfg = manifest.config();
  cfg["L"] = a.depth;
  cfg["alpha"] = a.alpha;
  cfg["eta"] = a.eta;
  cfg["step"] = a.step;
  cfg["max_rel_change"] = a.max_rel_change;
  cfg["max_iters"] = a.max_iters;
  cfg["signed"] = a.signed_model;

  std::optional<Problem> problem;
  std::optional<GroundTruth> truth;
  if (from_files) {
    problem.emplace(read_matrix_file(a.a_path), read_vector_file(a.y_path));
    cfg["A"] = a.a_path;
    cfg["y"] = a.y_path;
  } else {
    Rng rng(a.seed, 0);
    Instance inst = draw_instance(a.n, a.m, a.s, a.signed_model, rng);
    problem.emplace(std::move(inst.problem));
    truth = std::move(inst.truth);
    cfg["n"] = a.n;
    cfg["m"] = a.m;
    cfg["s"] = a.s;
  }
  const Problem& p = *problem;
  StopRule stop = StopRule::defaults_for(p);
  stop.max_iters = a.max_iters;
  if (a.loss_tol >= 0.0) stop.loss_tol = a.loss_tol;
  cfg["loss_tol"] = stop.loss_tol;

  const std::string solution_path = manifest.output("solution.txt");
  bool converged = false;

  if (a.depth == 1) {
    const GdResult r = gd_quadratic_until(p, a.eta, a.max_iters, stop.loss_tol);
    write_vector_file(solution_path, r.x);
    const double final_loss = loss_quadratic(p, r.x);
    converged = final_loss <= stop.loss_tol;
    out << "L=1 gradient descent: " << r.iterations << " iterations, loss "
        << format_double(final_loss) << '\n';
  } else {
    const FactorState init = a.signed_model ? FactorState::uniform_signed(p.cols(), a.alpha, a.depth)
                                            : FactorState::uniform_positive(p.cols(), a.alpha, a.depth);
    const ProductIterate init_prod = init.product();
    const WeightSpec ws = a.signed_model ? make_weights(init_prod.u_tilde, init_prod.v_tilde, a.depth)
                                         : make_weights_positive(init_prod.x_tilde, a.depth);
    const BetaStats beta = a.signed_model ? beta_stats(init_prod.u_tilde, init_prod.v_tilde, ws)
                                          : beta_stats_positive(init_prod.x_tilde, ws);
    BpConfig bp_cfg;
    bp_cfg.nonneg = !a.signed_model;
    bp_cfg.weights = ws;
    const BpResult bp = basis_pursuit(p, bp_cfg);

    DiagnosticsConfig diag;
    diag.cadence = std::max<long long>(1, a.diag_every);
    diag.references.emplace_back("bp", bp.z_hat);
    if (truth && (a.signed_model || (truth->x_star.array() >= 0.0).all())) {
      diag.references.emplace_back("xstar", truth->x_star);
    }
    std::optional<Vector> reference;
    if (!a.signed_model) reference = bp.z_hat;
    const FlowResult r = run_flow(p, init, make_policy(a, reference), stop, diag);
    converged = r.converged();
    write_vector_file(solution_path, r.final_product.x_tilde);

    auto diag_file = open_output(manifest.output("diagnostics.csv"));
    write_diagnostics_csv(diag_file, *r.diagnostics);

    BoundReport report = make_bound_report(bp.l1_value, beta, a.depth, r.final_product.x_tilde, ws,
                                           bp_cfg.abs_tol);
    report.alpha = a.alpha;
    report.m = static_cast<int>(p.rows());
    report.s = truth ? truth->sparsity() : 0;
    auto bounds_file = open_output(manifest.output("bounds.json"));
    bounds_file << bound_report_json(report) << '\n';

    out << "L=" << a.depth << (a.signed_model ? " signed" : " positive") << " flow: "
        << r.iterations << " iterations, loss " << format_double(r.terminal_loss) << ", "
        << to_string(r.termination) << '\n';
    out << "Q=" << format_double(report.q_min) << " gap=" << format_double(report.realized_gap)
        << " epsilon=" << format_double(report.epsilon)
        << (report.bound_satisfied ? " (bound holds)" : " (bound not certified)") << '\n';
  }
  manifest.write();
  return converged ? kExitOk : kExitNotConverged;
}

// ---- experiments -------------------------------------------------------------

struct ExperimentArgs {
  std::string preset = "desk";
  bool paper_faithful = false;
  std::optional<int> n;
  std::optional<int> m;
  std::optional<int> s;
  std::vector<int> m_values;
  std::vector<int> s_values;
  std::vector<int> depths;
  std::vector<double> alpha_grid;
  std::vector<double> levels;
  std::vector<std::string> solvers;
  std::optional<int> trials;
  std::optional<double> alpha;
  std::optional<double> eta;
  std::optional<long long> max_iters;
  std::optional<double> success_tol;
  bool positive = false;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out_dir = ".";
};

void require_preset(const std::string& preset) {
  if (preset != "desk" && preset != "smoke") {
    throw ArgumentError("unknown preset '" + preset + "' (expected desk or smoke)");
  }
}

PhaseConfig phase_config(const ExperimentArgs& a) {
  require_preset(a.preset);
  PhaseConfig cfg = PhaseConfig::desk(a.paper_faithful);
  if (a.preset == "smoke") {
    cfg.n = 10;
    cfg.m_values = {3, 6, 10};
    cfg.s_values = {1, 2};
    cfg.trials = 4;
    cfg.max_iters = 20'000;
  }
  if (a.n) cfg.n = *a.n;
  if (!a.m_values.empty()) cfg.m_values = a.m_values;
  if (!a.s_values.empty()) cfg.s_values = a.s_values;
  if (!a.solvers.empty()) cfg.solvers = a.solvers;
  if (a.trials) cfg.trials = *a.trials;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.eta) cfg.eta = *a.eta;
  if (a.max_iters) cfg.max_iters = *a.max_iters;
  if (a.success_tol) cfg.success_rel_tol = *a.success_tol;
  if (a.seed) cfg.base_seed = *a.seed;
  cfg.signed_values = !a.positive;
  cfg.validate();
  return cfg;
}

int cmd_phase(const ExperimentArgs& a, std::ostream& out) {
  const PhaseConfig cfg = phase_config(a);
  ensure_dir(a.out_dir);
  Manifest manifest("phase", a.out_dir);
  manifest.set_seed(cfg.base_seed);
  Json& j = manifest.config();
  j["preset"] = a.preset;
  j["paper_faithful"] = a.paper_faithful;
  j["n"] = cfg.n;
  j["m_values"] = cfg.m_values;
  j["s_values"] = cfg.s_values;
  j["trials"] = cfg.trials;
  j["solvers"] = cfg.solvers;
  j["alpha"] = cfg.alpha;
  j["eta"] = cfg.eta;
  j["max_iters"] = cfg.max_iters;
  j["success_rel_tol"] = cfg.success_rel_tol;
  j["signed"] = cfg.signed_values;
  j["workers"] = resolve_workers(a.workers);

  const auto cells = run_phase_diagram(cfg, a.workers);
  auto f = open_output(manifest.output("phase.csv"));
  write_phase_csv(f, cells);
  f.close();
  for (int s : cfg.s_values) {
    out << "s=" << s;
    for (const auto& tag : cfg.solvers) {
      const auto b = success_boundary(cells, tag, s);
      out << "  " << tag << ": " << (b ? "m>=" + std::to_string(*b) : std::string("none"));
    }
    out << '\n';
  }
  manifest.write();
  return kExitOk;
}

ScalingConfig scaling_config(const ExperimentArgs& a) {
  require_preset(a.preset);
  ScalingConfig cfg = ScalingConfig::desk(a.paper_faithful);
  if (a.preset == "smoke") {
    cfg.n = 40;
    cfg.m = 20;
    cfg.s = 2;
    cfg.alpha_grid = {2e-1, 1e-1};
    cfg.trials = 1;
  }
  if (a.n) cfg.n = *a.n;
  if (a.m) cfg.m = *a.m;
  if (a.s) cfg.s = *a.s;
  if (!a.depths.empty()) cfg.depth_list = a.depths;
  if (!a.alpha_grid.empty()) cfg.alpha_grid = a.alpha_grid;
  if (a.trials) cfg.trials = *a.trials;
  if (a.eta) cfg.eta0 = *a.eta;
  if (a.max_iters) cfg.max_iters = *a.max_iters;
  if (a.seed) cfg.base_seed = *a.seed;
  cfg.validate();
  return cfg;
}

int cmd_scaling(const ExperimentArgs& a, std::ostream& out) {
  const ScalingConfig cfg = scaling_config(a);
  ensure_dir(a.out_dir);
  Manifest manifest("scaling", a.out_dir);
  manifest.set_seed(cfg.base_seed);
  Json& j = manifest.config();
  j["preset"] = a.preset;
  j["paper_faithful"] = a.paper_faithful;
  j["n"] = cfg.n;
  j["m"] = cfg.m;
  j["s"] = cfg.s;
  j["L"] = cfg.depth_list;
  j["alpha_grid"] = cfg.alpha_grid;
  j["trials"] = cfg.trials;
  j["eta0"] = cfg.eta0;
  j["max_relative_change"] = cfg.max_relative_change;
  j["max_iters"] = cfg.max_iters;
  j["workers"] = resolve_workers(a.workers);

  const auto rows = run_scaling(cfg, a.workers);
  auto f = open_output(manifest.output("scaling.csv"));
  write_scaling_csv(f, rows);
  f.close();
  for (const auto& s : summarize_scaling(rows)) {
    out << "L=" << s.depth << ' ' << s.statistic << " = " << format_double(s.value) << '\n';
  }
  manifest.write();
  return kExitOk;
}

NoiseConfig noise_config(const ExperimentArgs& a) {
  require_preset(a.preset);
  NoiseConfig cfg = NoiseConfig::desk();
  if (a.preset == "smoke") {
    cfg.n = 20;
    cfg.m = 12;
    cfg.s = 2;
    cfg.trials = 2;
    cfg.noise_levels = {0.0, 0.05};
  }
  if (a.n) cfg.n = *a.n;
  if (a.m) cfg.m = *a.m;
  if (a.s) cfg.s = *a.s;
  if (!a.depths.empty()) {
    if (a.depths.size() != 1) throw ArgumentError("noise takes a single --L");
    cfg.depth = a.depths.front();
  }
  if (!a.levels.empty()) cfg.noise_levels = a.levels;
  if (a.trials) cfg.trials = *a.trials;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.eta) cfg.eta0 = *a.eta;
  if (a.max_iters) cfg.max_iters = *a.max_iters;
  if (a.seed) cfg.base_seed = *a.seed;
  cfg.signed_values = !a.positive;
  cfg.validate();
  return cfg;
}

int cmd_noise(const ExperimentArgs& a, std::ostream& out) {
  const NoiseConfig cfg = noise_config(a);
  ensure_dir(a.out_dir);
  Manifest manifest("noise", a.out_dir);
  manifest.set_seed(cfg.base_seed);
  Json& j = manifest.config();
  j["preset"] = a.preset;
  j["n"] = cfg.n;
  j["m"] = cfg.m;
  j["s"] = cfg.s;
  j["L"] = cfg.depth;
  j["noise_levels"] = cfg.noise_levels;
  j["trials"] = cfg.trials;
  j["alpha"] = cfg.alpha;
  j["eta0"] = cfg.eta0;
  j["max_relative_change"] = cfg.max_relative_change;
  j["max_iters"] = cfg.max_iters;
  j["signed"] = cfg.signed_values;
  j["workers"] = resolve_workers(a.workers);

  const auto records = run_noise(cfg, a.workers);
  auto f = open_output(manifest.output("noise.csv"));
  write_noise_csv(f, records);
  f.close();
  for (const auto& nm : noise_means(records)) {
    out << "noise " << format_double(nm.noise_l2) << ": mean rel error " << format_double(nm.mean_error)
        << '\n';
  }
  manifest.write();
  return kExitOk;
}

// ---- verify ------------------------------------------------------------------

struct VerifyArgs {
  std::vector<std::string> suites;
  std::uint64_t seed = 7;
  bool inject_fault = false;
  std::string out_dir = ".";
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  VerifyOptions opts;
  opts.suites = a.suites;
  opts.seed = a.seed;
  opts.inject_gradient_fault = a.inject_fault;
  ensure_dir(a.out_dir);
  Manifest manifest("verify", a.out_dir);
  manifest.set_seed(a.seed);
  manifest.config()["suites"] = a.suites.empty() ? verify_suite_names() : a.suites;

  const auto results = run_verify(opts);
  print_verify_report(out, results);
  const bool ok = std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
  manifest.write();
  return ok ? kExitOk : kExitVerifyFailed;
}

void add_experiment_options(CLI::App* cmd, ExperimentArgs& a) {
  cmd->add_option("--preset", a.preset, "desk or smoke")->capture_default_str();
  cmd->add_flag("--paper-faithful", a.paper_faithful, "full-scale settings: smaller alpha, longer runs");
  cmd->add_option("--n", a.n, "ambient dimension N");
  cmd->add_option("--trials", a.trials, "trials per cell");
  cmd->add_option("--seed", a.seed, "base seed");
  cmd->add_option("--workers", a.workers, "worker threads (0: all cores, capped by HFLOW_THREADS)");
  cmd->add_option("--max-iters", a.max_iters, "iteration cap per run");
  cmd->add_option("--out-dir", a.out_dir, "output directory")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient descent on Hadamard-factorized least squares"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);

  SolveArgs solve;
  auto* sc = app.add_subcommand("solve", "run the flow on one instance");
  sc->add_option("--n", solve.n, "ambient dimension N");
  sc->add_option("--m", solve.m, "measurements M");
  sc->add_option("--s", solve.s, "sparsity");
  sc->add_option("--seed", solve.seed, "instance seed")->capture_default_str();
  sc->add_flag("--signed", solve.signed_model, "signed model u^L - v^L");
  sc->add_option("--L", solve.depth, "depth; 1 runs plain gradient descent")->required();
  sc->add_option("--alpha", solve.alpha, "per-factor initialization scale")->capture_default_str();
  sc->add_option("--eta", solve.eta, "step size (initial step for backtracking)")->capture_default_str();
  sc->add_option("--step", solve.step, "fixed, backtracking or safeguarded")
      ->check(CLI::IsMember({"fixed", "backtracking", "safeguarded"}))
      ->capture_default_str();
  sc->add_option("--max-rel-change", solve.max_rel_change,
                 "backtracking: largest relative change of a factor entry per step")
      ->capture_default_str();
  sc->add_option("--max-iters", solve.max_iters, "iteration cap")->capture_default_str();
  sc->add_option("--loss-tol", solve.loss_tol, "stop below this loss (default 1e-14 ||y||^2)");
  sc->add_option("--A", solve.a_path, "matrix file");
  sc->add_option("--y", solve.y_path, "measurement file");
  sc->add_option("--out-dir", solve.out_dir, "output directory")->capture_default_str();
  sc->add_flag("--bounds", solve.bounds, "require the l1 bound report (L >= 2)");
  sc->add_option("--diag-every", solve.diag_every, "diagnostics cadence in steps")->capture_default_str();

  ExperimentArgs phase;
  auto* pc = app.add_subcommand("phase", "recovery phase diagram");
  add_experiment_options(pc, phase);
  pc->add_option("--m-values", phase.m_values, "measurement grid")->delimiter(',');
  pc->add_option("--s-values", phase.s_values, "sparsity grid")->delimiter(',');
  pc->add_option("--solvers", phase.solvers, "bp, gd_L1, gd_L2, ...")->delimiter(',');
  pc->add_option("--alpha", phase.alpha, "per-factor initialization scale");
  pc->add_option("--eta", phase.eta, "fixed step size");
  pc->add_option("--success-tol", phase.success_tol, "relative l2 error counted as success");
  pc->add_flag("--positive", phase.positive, "non-negative ground truth and positive model");

  ExperimentArgs scaling;
  auto* scl = app.add_subcommand("scaling", "l1 gap against initialization scale");
  add_experiment_options(scl, scaling);
  scl->add_option("--m", scaling.m, "measurements M");
  scl->add_option("--s", scaling.s, "sparsity");
  scl->add_option("--L", scaling.depths, "depths")->delimiter(',');
  scl->add_option("--alpha-grid", scaling.alpha_grid, "descending alpha values")->delimiter(',');
  scl->add_option("--eta", scaling.eta, "initial line-search step");

  ExperimentArgs noise;
  auto* nc = app.add_subcommand("noise", "recovery error against measurement noise");
  add_experiment_options(nc, noise);
  nc->add_option("--m", noise.m, "measurements M");
  nc->add_option("--s", noise.s, "sparsity");
  nc->add_option("--L", noise.depths, "depth");
  nc->add_option("--levels", noise.levels, "noise l2 norms")->delimiter(',');
  nc->add_option("--alpha", noise.alpha, "per-factor initialization scale");
  nc->add_option("--eta", noise.eta, "initial line-search step");
  nc->add_flag("--positive", noise.positive, "non-negative ground truth and positive model");

  VerifyArgs verify;
  auto* vc = app.add_subcommand("verify", "run the invariant suites");
  vc->add_option("--suite", verify.suites, "gradient, bregman, bounds")->delimiter(',');
  vc->add_option("--seed", verify.seed, "seed")->capture_default_str();
  vc->add_option("--out-dir", verify.out_dir, "manifest directory")->capture_default_str();
  vc->add_flag("--inject-gradient-fault", verify.inject_fault)->group("");

  std::vector<const char*> argv{"hflow"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sc) return cmd_solve(solve, out);
    if (*pc) return cmd_phase(phase, out);
    if (*scl) return cmd_scaling(scaling, out);
    if (*nc) return cmd_noise(noise, out);
    if (*vc) return cmd_verify(verify, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace hflow
