#pragma once

// Geometric-ergodicity certificate for a closed-loop SLDS with V(x) = |x|^2:
// drift constants, the small set S, the minorization constant and checks that
// evaluate each inequality directly.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "slds/core.hpp"
#include "slds/random.hpp"

namespace slds {

struct RegionClassification {
  /// Regions meeting {|x| > rho}.
  std::vector<std::size_t> unbounded_set;
  /// Regions contained in the closed rho-ball.
  std::vector<std::size_t> bounded_set;

  bool is_unbounded(std::size_t j) const;
};

struct ProbeOptions {
  std::size_t directions = 1000;
  /// Probe radii beyond the ball are rho * (1 + relative_offset), then far out.
  double relative_offset = 1e-6;
  std::uint64_t seed = 0x5eed5eedULL;
};

/// Radial shells are classified from their radii. Polyhedra use the declared
/// flag, cross-checked by probing points outside the ball along random and
/// coordinate directions.
RegionClassification classify_regions(const SldsModeld& model, double rho_ball,
                                      const ProbeOptions& probe = {});

/// Ball {|x - center| <= radius} together with the log of its minorization
/// constant. An empty center means the origin.
struct SmallSet {
  Eigen::Index n = 1;
  double radius = 0;
  double log_beta = 0;
  VectorXd center;

  bool contains(const Eigen::Ref<const VectorXd>& x) const {
    return center.size() == 0 ? x.norm() <= radius : (x - center).norm() <= radius;
  }
  /// center, or zeros
  VectorXd centre_or_origin() const { return center.size() == 0 ? VectorXd::Zero(n) : center; }
  double log_volume() const;
};

struct Certificate {
  Eigen::Index n = 1;
  double rho_ball = 0;
  double gamma = 0;  // max |A_j|^2 over unbounded regions
  double c = 0;      // max |A_k|^2 over bounded regions (0 if none)
  double K = 0;      // n + c rho^2
  double r_hat = 0;  // 2K / (gamma (1 - gamma))
  double s_radius = 0;
  double lambda = 0;
  double K2 = 0;  // 3/2 + 2c + c^2 rho^2
  double log_beta = 0;
  /// Smallest rate for which the radial drift envelope holds outside S.
  double lambda_min = 0;
  /// The radial worst-case envelope confirms PV^(x) <= lambda V^(x) + K2 1_S(x).
  bool drift2_verified = false;
  std::size_t gamma_region = 0;
  std::optional<std::size_t> c_region;

  double beta() const;
  SmallSet small_set() const { return {n, s_radius, log_beta, {}}; }
  std::string nu_hat_descriptor() const;
};

/// Floor applied to gamma inside r_hat only.
inline constexpr double kGammaFloor = 1e-6;

Certificate certify(const ClosedLoopd& cl, const RegionClassification& classification,
                    double rho_ball, Eigen::Index n, std::optional<double> lambda_choice = {});

/// log beta = -(n/2) log(2 pi) - D^2 / 2 with D = s (1 + max_j |A_j|), the
/// largest |y - A_j x| over x, y in the s-ball.
double beta_lower_bound(const ClosedLoopd& cl, double s_radius, Eigen::Index n);

/// V^(x) = 1 + (1 - gamma) |x|^2 / (2n).
double v_hat(const Eigen::Ref<const VectorXd>& x, double gamma);

/// PV(x) = |A_{j(x)} x|^2 + n, exact for Gaussian noise.
double expected_next_v(const ClosedLoopd& cl, const SldsModeld& model,
                       const Eigen::Ref<const VectorXd>& x);

struct DriftViolation {
  std::size_t sample = 0;
  int condition = 1;  // 1: PV <= gamma V + K, 2: PV^ <= lambda V^ + K2 1_S
  double lhs = 0;
  double bound = 0;
};

struct DriftReport {
  std::size_t checked = 0;
  std::vector<DriftViolation> violations;
  double max_margin1 = -std::numeric_limits<double>::infinity();  // max of lhs - bound
  double max_margin2 = -std::numeric_limits<double>::infinity();
  bool ok() const { return violations.empty(); }
};

/// Samples are the columns of `samples`.
DriftReport drift_check(const ClosedLoopd& cl, const SldsModeld& model, const Certificate& cert,
                        const Eigen::Ref<const MatrixXd>& samples);

struct Overlap {
  double alpha = 1;      // integral of min(f, g)
  double log_alpha = 0;  // stays finite when alpha underflows
  double tv = 0;         // 2 (1 - alpha)
};

/// Overlap of N(mu1, I) and N(mu2, I): alpha = 2 Phi(-|mu1 - mu2| / 2).
Overlap gaussian_overlap(const Eigen::Ref<const VectorXd>& mu1, const Eigen::Ref<const VectorXd>& mu2);

struct OverlapReport {
  std::size_t pairs = 0;
  double min_log_alpha = 0;
  std::size_t non_positive = 0;
  /// Pairs per case: both inside rho-ball, one inside, both outside.
  std::size_t case_counts[3] = {0, 0, 0};
  bool ok() const { return non_positive == 0; }
};

/// Draws pairs uniformly from {|x|^2 + |y|^2 <= r_hat} and evaluates the
/// transition-kernel overlap for each.
OverlapReport overlap_positivity_check(const ClosedLoopd& cl, const SldsModeld& model,
                                       const Certificate& cert, std::size_t n_pairs,
                                       RandomStream& rng);

struct Box {
  VectorXd lo;
  VectorXd hi;
};

/// log P(x, box) = sum_i log P(lo_i <= (A x)_i + w_i <= hi_i).
double log_transition_box_probability(const ClosedLoopd& cl, const SldsModeld& model,
                                      const Eigen::Ref<const VectorXd>& x, const Box& box);

/// log of vol(box ∩ ball) / vol(ball), quasi-Monte Carlo unless the box is
/// inside the ball.
double log_nu_hat_box(const SmallSet& set, const Box& box, std::size_t qmc_points = 1 << 14);

struct MinorizationViolation {
  std::size_t point = 0;
  std::size_t box = 0;
  double log_p = 0;
  double log_rhs = 0;
};

struct MinorizationReport {
  std::size_t checked = 0;
  double min_slack = std::numeric_limits<double>::infinity();  // log_p - log_rhs
  std::vector<MinorizationViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks log P(x, A) >= log beta + log nu^(A) for every point/box pair. n <= 3.
MinorizationReport minorization_check(const ClosedLoopd& cl, const SldsModeld& model,
                                      const SmallSet& set, const std::vector<Box>& boxes,
                                      const std::vector<VectorXd>& points);

void write_certificate_report(std::ostream& os, const Certificate& cert,
                              const DriftReport* drift = nullptr,
                              const OverlapReport* overlap = nullptr);

}  // namespace slds
