#pragma once

// Experiment harness: the radial case-study model, the pseudo-sample-complexity
// stopping rule, dimension and gamma sweeps, and the config-driven pipeline.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slds/core.hpp"
#include "slds/random.hpp"

namespace slds {

/// Model, policy, reward and the matching closed loop, built together.
struct ModelBundle {
  SldsModeld model;
  Policyd policy;
  RewardSpecd spec;
  ClosedLoopd cl;
  double rho_ball = 0;
};

/// Two radial shells: gamma_root * I outside the rho-ball, c_root * I inside.
/// B = 0, pi = 0, Q = I, R = 1, so the reward is |x| (already |P| <= 1).
ModelBundle build_case_study(Eigen::Index n, double gamma_root, double c_root, double rho_ball);

struct PseudoResult {
  std::size_t N = 0;
  bool censored = false;
};

/// First N >= 1 with |S_N / N - S_{N+1} / (N+1)| < eps_stop, where
/// S_N = r(x_0) + ... + r(x_{N-1}). Checked in the single-pass form
/// |S_N / N - r(x_N)| / (N+1). Censored at max_steps.
PseudoResult pseudo_sample_complexity(const ClosedLoopd& cl, const SldsModeld& model,
                                      const RewardSpecd& spec, double eps_stop, RandomStream& rng,
                                      std::size_t max_steps, const VectorXd& x0);

struct SweepConfig {
  std::vector<Eigen::Index> dims;
  std::vector<double> gammas;  // gamma_root values
  double c = 2;                // c_root
  double rho_ball = 10;
  double eps_stop = 1e-3;
  std::size_t trials = 100;
  std::uint64_t master_seed = 20240601;
  std::size_t max_steps = 10'000'000;
  double x0_norm = 0;  // x0 = x0_norm * e_1

  void validate() const;

  static SweepConfig desk_dimension();  // n = 25..200 step 25, gamma_root 0.9
  static SweepConfig desk_gamma();      // gamma_root = 0.5..0.9 step 0.05, n in {10, 50}
  static SweepConfig paper_dimension(); // n = 1..2000 step 50, eps 1e-10, 100000 trials
  static SweepConfig paper_gamma();     // 10000 trials
};

struct TrialRow {
  Eigen::Index n = 0;
  double gamma = 0;
  std::size_t trial = 0;
  std::size_t N = 0;
  bool censored = false;
  std::uint64_t seed = 0;
};

struct AggregateRow {
  Eigen::Index n = 0;
  double gamma = 0;
  std::size_t trials = 0;
  double N_avg = 0;
  double stderr_ = 0;
  double censored_frac = 0;
  double mean_runtime_s = 0;  // wall clock, never written to the CSVs
};

struct FitRow {
  double gamma = 0;
  std::string range;  // "upper_half" or "full"
  std::size_t points = 0;
  std::optional<double> slope, intercept, r2;
};

struct SpearmanRow {
  Eigen::Index n = 0;
  std::size_t points = 0;
  std::optional<double> rho;  // undefined with fewer than two distinct gammas
};

struct SweepResult {
  std::vector<TrialRow> raw;
  std::vector<AggregateRow> rows;
  std::vector<FitRow> fits;           // sweep_dimension
  std::vector<SpearmanRow> spearman;  // sweep_gamma
};

/// Seed of one (n, gamma, trial) cell. Independent of the trial count.
std::uint64_t cell_seed(std::uint64_t master, Eigen::Index n, double gamma_root, std::size_t trial);

/// Runs every (gamma, n, trial) cell on `threads` workers; the result does not
/// depend on the thread count.
SweepResult run_grid(const SweepConfig& config, std::size_t threads);

/// run_grid plus least-squares fits of N_avg against n per gamma, over the
/// upper half of the n-grid (primary) and the full grid.
SweepResult sweep_dimension(const SweepConfig& config, std::size_t threads);

/// run_grid plus Spearman(N_avg, gamma) per n.
SweepResult sweep_gamma(const SweepConfig& config, std::size_t threads);

/// Aggregated rows average the uncensored trials when fewer than 5% are
/// censored; otherwise every trial enters at the cap.
AggregateRow aggregate(const std::vector<TrialRow>& trials, std::size_t max_steps);

void write_raw_csv(std::ostream& os, const SweepResult& r);
void write_aggregate_csv(std::ostream& os, const SweepResult& r);
void write_fit_csv(std::ostream& os, const SweepResult& r);
void write_spearman_csv(std::ostream& os, const SweepResult& r);
/// Whitespace-separated "x N_avg" pairs, one block per gamma (dimension) or n (gamma).
void write_plot_data(std::ostream& os, const SweepResult& r, bool by_dimension);

struct PipelineConfig {
  std::uint64_t master_seed = 20240601;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::optional<SweepConfig> dimension;
  std::optional<SweepConfig> gamma;
  std::string out_dir;  // empty: caller decides
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kCsvSchemaVersion = "1";

struct PipelineSummary {
  std::vector<std::string> files;
  SweepResult dimension;
  SweepResult gamma;
};

/// Reads the config, certifies every case-study model on the grid, runs the
/// configured sweeps and writes CSVs plus manifest.json into out_dir.
/// Throws ConfigParse, CertificationFailed or IoError.
PipelineSummary run_pipeline(const std::string& config_path, const std::string& out_dir,
                             std::optional<std::size_t> threads = {},
                             std::optional<std::uint64_t> seed_override = {});

}  // namespace slds
