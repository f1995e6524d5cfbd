#pragma once

// Finite-sample bound: the sample-size requirement, the individual error terms
// it is assembled from, and an empirical calibration check.

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "slds/core.hpp"
#include "slds/ergodicity.hpp"

namespace slds {

/// Constants the bound leaves unspecified. The defaults (all 1) are a
/// convention, not derived values; every scaling law holds for any positive choice.
struct BoundConstants {
  double c_10as = 1;
  double c_1_sq = 1;
  double c_2as0 = 1;
  double c_2as20 = 1;
  double o1 = 1;
  double o2 = 1;
  double o3 = 1;
  double leading_C = 1;  // multiplier of the Omega(n / (beta eps^2 delta (1 - gamma))) form

  void validate() const;
};

struct SampleRequirement {
  double log_beta = 0;
  double log_n = 0;   // natural log of n_real
  double n_real = 0;  // unrounded; +inf when it overflows
  double n_required = 0;  // ceil(n_real), at least 1; +inf when it overflows
};

/// N = o1 (o2 n + o3 + gamma |x0|^2) / ((1 - gamma) delta beta eps^2).
/// Evaluated directly when beta is a normal double, otherwise in the log domain.
SampleRequirement required_samples_at(double log_beta, double gamma, double eps, double delta,
                                      Eigen::Index n, double x0_norm_sq,
                                      const BoundConstants& consts = {});

/// Same, with beta given directly (no log round trip).
SampleRequirement required_samples_beta(double beta, double gamma, double eps, double delta,
                                        Eigen::Index n, double x0_norm_sq,
                                        const BoundConstants& consts = {});

struct RequiredSamples {
  SampleRequirement paper;        // at the certificate's beta
  std::optional<SampleRequirement> operational;  // at the operational beta, if supplied
};

RequiredSamples required_samples(const Certificate& cert, double eps, double delta, Eigen::Index n,
                                 double x0_norm_sq, const BoundConstants& consts = {},
                                 std::optional<double> log_beta_op = {});

/// C n / (beta eps^2 delta (1 - gamma)) with C = consts.leading_C.
double omega_form(double log_beta, double gamma, double eps, double delta, Eigen::Index n,
                  const BoundConstants& consts = {});

struct BoundReport {
  double N = 0;
  double log_beta = 0;
  double pi_vhat_bound = 0;    // 3/2 + c rho^2 / (2n)
  double rbar_vhat_bound = 0;  // 2n / (1 - gamma)
  double ex_vhat_bound = 0;    // pi_vhat_bound + (1 - gamma) gamma |x|^2 / (2n)
  double term_p26 = 0;
  double term_p27 = 0;
  double term_p28 = 0;
  double term_p29 = 0;
  double term_p30 = 0;      // +inf when beta underflows the quotient
  double log_term_p30 = 0;  // always finite
  /// Sum of the five terms: bound on the mean squared error of the time average.
  double mse_bound = 0;
  double n_required = 0;
};

BoundReport bound_terms(const Certificate& cert, Eigen::Index n, double N, double x0_norm_sq,
                        const BoundConstants& consts = {}, std::optional<double> log_beta = {},
                        std::optional<double> eps = {}, std::optional<double> delta = {});

void write_bound_report(std::ostream& os, const BoundReport& report);
void write_bound_csv_header(std::ostream& os);
void write_bound_csv_row(std::ostream& os, const BoundReport& report);

struct ReferenceValue {
  double mean = 0;
  double standard_error = 0;  // batch means
  std::size_t steps = 0;
};

/// Long streaming run of the plain chain from x0, discarding `burn_in` steps.
/// Allocation-free in the inner loop.
ReferenceValue reference_reward(const ClosedLoopd& cl, const SldsModeld& model,
                                const RewardSpecd& spec, const VectorXd& x0, std::size_t steps,
                                std::uint64_t seed, std::size_t burn_in = 10'000,
                                std::size_t batches = 100);

struct ValidationResult {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double N = 0;
  double failure_rate = 0;
  double threshold = 0;  // delta + 2 sqrt(delta (1 - delta) / trials)
  bool passed = false;
};

/// Runs `trials` independent trajectories of length N from x0 and counts those
/// whose time average misses rho_star by more than eps. A calibration check of
/// the bound's scaling form, not a proof check.
ValidationResult validate_bound(const ClosedLoopd& cl, const SldsModeld& model,
                                const RewardSpecd& spec, Eigen::Index N, double eps, double delta,
                                std::size_t trials, double rho_star, const VectorXd& x0,
                                std::uint64_t master_seed, std::size_t threads = 1);

}  // namespace slds
