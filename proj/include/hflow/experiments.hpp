#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hflow/core.hpp"
#include "hflow/rng.hpp"

namespace hflow {

enum class ExperimentTag : std::uint16_t { Phase = 1, Scaling = 2, Noise = 3 };

// Stream id = tag << 48 | m << 32 | s << 16 | trial, so distinct cells never
// share a stream. m, s and trial must each fit in 16 bits.
Rng seed_for_trial(std::uint64_t base_seed, ExperimentTag tag, int m, int s, int trial);

struct Instance {
  Problem problem;
  GroundTruth truth;
};

// A then x_star from the same stream, y = A x_star.
Instance draw_instance(int n, int m, int s, bool signed_values, Rng& rng);

// Worker count: `requested` if positive, else the hardware concurrency;
// HFLOW_THREADS caps the result when set.
int resolve_workers(int requested);

// Solver tags: "bp", "gd_L1" (plain GD on the quadratic), "gd_L<k>" for k >= 2.
struct SolverSpec {
  std::string tag;
  int depth = 0;  // 0 for bp
};

SolverSpec parse_solver(const std::string& tag);

struct PhaseConfig {
  int n = 20;
  std::vector<int> m_values;
  std::vector<int> s_values;
  int trials = 20;
  std::vector<std::string> solvers{"bp", "gd_L1", "gd_L2"};
  double alpha = 1e-4;  // per-factor initialization scale
  double eta = 1e-2;
  long long max_iters = 1'000'000;
  double success_rel_tol = 0.01;
  bool signed_values = true;
  std::uint64_t base_seed = 2024;

  void validate() const;
  // N=20, m = 1..20, s = 1..6, 20 trials. The faithful variant restores
  // alpha = 1e-6 and T = 1e7.
  static PhaseConfig desk(bool paper_faithful = false);
};

struct PhaseCell {
  int m = 0;
  int s = 0;
  std::string solver_tag;
  int success_count = 0;
  int trials = 0;
  double mean_rel_error = 0.0;  // over trials whose solver returned
  double mean_iterations = 0.0;

  double success_rate() const { return trials > 0 ? static_cast<double>(success_count) / trials : 0.0; }
};

// Cells ordered by (m, s, solver) in config order.
std::vector<PhaseCell> run_phase_diagram(const PhaseConfig& cfg, int workers = 0);

void write_phase_csv(std::ostream& os, const std::vector<PhaseCell>& cells);

// Smallest m in the grid such that the cell (m, s) and every larger m reach
// `min_rate`. Empty when even the largest m falls short.
std::optional<int> success_boundary(const std::vector<PhaseCell>& cells, const std::string& solver,
                                    int s, double min_rate = 0.9);

struct ScalingConfig {
  int n = 200;
  int m = 60;
  int s = 5;
  std::vector<int> depth_list{2, 3, 4};
  std::vector<double> alpha_grid;  // strictly positive, descending
  int trials = 3;
  std::uint64_t base_seed = 2024;
  double eta0 = 1e-1;
  double max_relative_change = 0.1;  // line-search cap, see StepPolicy
  long long max_iters = 2'000'000;

  void validate() const;
  static ScalingConfig desk(bool paper_faithful = false);
};

struct ScalingRow {
  int depth = 0;
  double alpha = 0.0;
  double rel_gap = 0.0;            // mean over trials
  double predicted_epsilon = 0.0;  // mean over trials, NaN if any precondition fails
  bool precondition_ok = false;    // all trials
  int failed_trials = 0;
};

std::vector<ScalingRow> run_scaling(const ScalingConfig& cfg, int workers = 0);

struct ScalingSummary {
  int depth = 0;
  std::string statistic;  // "slope_smallest3" or "corr_inv_log"
  double value = 0.0;
};

// L >= 3: log-log slope of rel_gap against alpha over the three smallest
// alphas. L = 2: correlation of rel_gap with 1 / log(1 / alpha).
std::vector<ScalingSummary> summarize_scaling(const std::vector<ScalingRow>& rows);

void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows);

struct NoiseConfig {
  int n = 50;
  int m = 25;
  int s = 3;
  int depth = 2;
  std::vector<double> noise_levels;
  int trials = 10;
  double alpha = 1e-4;
  double eta0 = 1e-1;
  double max_relative_change = 0.1;
  long long max_iters = 1'000'000;
  bool signed_values = true;
  std::uint64_t base_seed = 2024;

  void validate() const;
  static NoiseConfig desk();
};

struct NoiseRecord {
  double noise_l2 = 0.0;
  int trial = 0;
  double rel_error_l2 = 0.0;  // NaN when the run failed
};

// Ordered by (noise level, trial). Each trial shares A, x_star and the noise
// direction across levels.
std::vector<NoiseRecord> run_noise(const NoiseConfig& cfg, int workers = 0);

struct NoiseMean {
  double noise_l2 = 0.0;
  double mean_error = 0.0;
};

std::vector<NoiseMean> noise_means(const std::vector<NoiseRecord>& records);

void write_noise_csv(std::ostream& os, const std::vector<NoiseRecord>& records);

// Least-squares slope of ys on xs.
double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys);
// Least-squares intercept of ys on xs.
double fit_intercept(const std::vector<double>& xs, const std::vector<double>& ys);
double correlation(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace hflow
