#pragma once

// Split-chain (regenerative) simulation and the block estimators built on it.
//
// On the small set S the kernel dominates beta * nu^, so each transition out of
// x in S first flips a coin theta ~ Bernoulli(beta): on heads the next state is
// drawn from nu^ (uniform on S) and the chain regenerates, on tails it is drawn
// from the residual kernel (P - beta nu^) / (1 - beta) by rejection. The
// marginal law of the next state is P(x, .) either way.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "slds/core.hpp"
#include "slds/ergodicity.hpp"
#include "slds/random.hpp"

namespace slds {

/// Small set with the closed-form minorization constant for an arbitrary
/// ball: log beta = -(n/2) log(2 pi) - D^2/2 + min(0, log vol(S)). The volume
/// term only matters for balls of volume < 1.
///
/// Centred at the origin, D = radius (1 + max_j |A_j|) as in beta_lower_bound.
/// With a center m, D = radius (1 + a) + b where a and b are the maxima of
/// |A_j| and |(I - A_j) m| over the regions that can meet the ball (every
/// polyhedral region counts). This bounds |y - A_j x| for x, y in S.
SmallSet operational_small_set(const ClosedLoopd& cl, double radius);
SmallSet operational_small_set(const ClosedLoopd& cl, const SldsModeld& model, double radius,
                               const VectorXd& center);

/// Radius at which the Gaussian part -(n/2) log(2 pi) - D^2/2 equals
/// target_log_beta, otherwise the radius with D = 1. A ball of volume < 1
/// additionally pays log vol.
double default_operational_radius(const ClosedLoopd& cl, double target_log_beta = -3.0);
/// Same for a ball around `center` (bisection, D grows with the radius); throws InvalidArgument when even a tiny
/// ball there misses the target.
double default_operational_radius(const ClosedLoopd& cl, const SldsModeld& model,
                                  const VectorXd& center, double target_log_beta = -3.0);

class SplitScheme {
 public:
  enum class Kind { Ball, IidDebug };

  /// Regenerate on the ball with probability beta <= exp(set.log_beta).
  static SplitScheme ball(const SmallSet& set, std::optional<double> beta = std::nullopt);
  /// Debug mode: S = R^n and beta = 1. Only valid when every closed-loop
  /// matrix is zero, so that nu^ = N(0, I) = P(x, .) for all x.
  static SplitScheme iid_debug(const ClosedLoopd& cl);

  Kind kind() const { return kind_; }
  const SmallSet& set() const { return set_; }
  double beta() const { return beta_; }
  bool in_set(const Eigen::Ref<const VectorXd>& x) const {
    return kind_ == Kind::IidDebug || set_.contains(x);
  }

 private:
  Kind kind_ = Kind::Ball;
  SmallSet set_;
  double beta_ = 0;
};

struct SplitValidity {
  std::size_t pairs = 0;
  /// max over grid of log(beta q(y)) - log p_x(y); must be <= 0. The bound is
  /// attained at antipodal boundary points, hence the rounding slack.
  double max_log_ratio = -std::numeric_limits<double>::infinity();
  bool ok() const { return max_log_ratio <= 1e-9; }
};

/// Checks beta q(y) <= p_x(y) for x, y on a radial/random grid inside S.
SplitValidity validate_split(const ClosedLoopd& cl, const SldsModeld& model,
                             const SplitScheme& scheme, std::size_t grid, RandomStream& rng);

/// Uniform draw from the ball of radius set.radius.
VectorXd sample_nu_hat(const SmallSet& set, RandomStream& rng);
VectorXd sample_nu_hat(const Certificate& cert, RandomStream& rng);

struct SplitState {
  VectorXd x;
  int theta = 0;
};

/// Writes the next state into `out` and returns the regeneration bit attached
/// to the transition out of x.
int split_step_into(const ClosedLoopd& cl, const SldsModeld& model, const SplitScheme& scheme,
                    const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out,
                    RandomStream& rng);

/// Returns (x, theta) and the next state.
std::pair<SplitState, VectorXd> split_step(const ClosedLoopd& cl, const SldsModeld& model,
                                           const SplitScheme& scheme, const VectorXd& x,
                                           RandomStream& rng);

/// Rejection proposals allowed in a row before giving up.
inline constexpr std::size_t kMaxRejections = 1'000'000;

/// Half-open index range [begin, end) of one regeneration block.
struct Block {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index length() const { return end - begin; }
};

/// Split-chain trajectory annotated with its regeneration structure.
///
/// taus holds every t >= 1 with theta_{t-1} = 1. The log runs past the horizon
/// N until the first regeneration after N (tau_{R(N)}), so that the tail of the
/// last straddling block is available.
class RegenerationLog {
 public:
  static RegenerationLog from_chain(MatrixXd states, std::vector<std::uint8_t> thetas,
                                    Eigen::Index horizon, bool x0_from_nu_hat = false);

  const MatrixXd& states() const { return states_; }
  const std::vector<std::uint8_t>& thetas() const { return thetas_; }
  const std::vector<Eigen::Index>& taus() const { return taus_; }
  Eigen::Index horizon() const { return horizon_; }
  bool x0_from_nu_hat() const { return x0_from_nu_hat_; }

  /// R(N) (1-based) if some tau exceeds N.
  std::optional<std::size_t> r_of_n() const { return r_of_n_; }
  /// tau_{R(N)} - N.
  std::optional<Eigen::Index> delta_n() const;
  std::optional<Eigen::Index> tau_r() const;

  /// T_m = tau_m - tau_{m-1} with tau_0 = 0, for every recorded tau.
  std::vector<Eigen::Index> excursions() const;
  /// Consecutive blocks B_m = [tau_m, tau_{m+1}) among the recorded taus.
  std::vector<Block> blocks() const;
  /// Blocks used for statistics: those inside [0, N), plus [0, tau_1) when x0
  /// was drawn from nu^.
  std::vector<Block> complete_blocks() const;

 private:
  MatrixXd states_;
  std::vector<std::uint8_t> thetas_;
  std::vector<Eigen::Index> taus_;
  Eigen::Index horizon_ = 0;
  bool x0_from_nu_hat_ = false;
  std::optional<std::size_t> r_of_n_;
};

struct RegenOptions {
  enum class Start { NuHat, Given };
  Start start = Start::NuHat;
  VectorXd x0;  // used with Start::Given
  /// Steps allowed after N while waiting for tau_{R(N)}.
  Eigen::Index max_extension = 10'000'000;
  double divergence_bound = 1e150;
};

RegenerationLog simulate_regenerative(const ClosedLoopd& cl, const SldsModeld& model,
                                      const SplitScheme& scheme, Eigen::Index horizon,
                                      RandomStream& rng, const RegenOptions& options = {});

/// Minimum number of complete blocks for the block-level estimators.
inline constexpr std::size_t kMinBlocks = 30;

struct EstimatorOutput {
  double reward_timeavg = 0;
  double sigma2_as = 0;  // NaN when fewer than kMinBlocks complete blocks
  double standard_error = 0;  // NaN when fewer than kMinBlocks complete blocks
  std::size_t block_count = 0;
  std::vector<std::pair<std::string, double>> ratio_estimates;
  std::vector<std::string> warnings;
};

/// r(x_i) for i = 0 .. L-1 over the whole log.
VectorXd log_rewards(const RegenerationLog& log, const RewardSpecd& spec);

/// (1/N) sum_{i<N} r(x_i), with a block-bootstrap standard error when at least
/// kMinBlocks complete blocks exist.
EstimatorOutput estimate_reward(const RegenerationLog& log, const RewardSpecd& spec,
                                std::size_t bootstrap_resamples = 400,
                                std::uint64_t bootstrap_seed = 1);

using StatePredicate = std::function<bool(const Eigen::Ref<const VectorXd>&)>;

/// Ratio estimator of nu_pi(A): visits to A over total length, complete blocks only.
double estimate_invariant_prob(const RegenerationLog& log, const StatePredicate& in_set);

/// Mean over complete blocks of (sum of r - rho_hat)^2 divided by mean block length.
double estimate_sigma2_as(const RegenerationLog& log, const RewardSpecd& spec, double rho_hat);

/// One pass over the blocks, centring at the block ratio estimate of the mean.
/// Biased by O(1/N) relative to the two-pass form.
double estimate_sigma2_as_streaming(const RegenerationLog& log, const RewardSpecd& spec);

struct SumDecomposition {
  double O1 = 0;  // sum over [0, tau_1)
  double Z = 0;   // sum over [tau_1, tau_{R(N)})
  double O2 = 0;  // sum over [N, tau_{R(N)})
  double direct = 0;  // sum over [0, N)
};

/// Splits sum_{i<N} (r(x_i) - rho_hat) as O1 + Z - O2.
SumDecomposition decompose_sum(const RegenerationLog& log, const VectorXd& rewards, double rho_hat);
SumDecomposition decompose_sum(const RegenerationLog& log, const RewardSpecd& spec, double rho_hat);

/// Two-pass estimator bundle: time average, sigma^2_as centred at it, standard
/// error and the ratio estimate of nu_pi(S).
EstimatorOutput estimate_all(const RegenerationLog& log, const RewardSpecd& spec,
                             const SplitScheme& scheme);

/// m,tau_m,T_m,block_reward_sum for every complete block.
void write_blocks_csv(std::ostream& os, const RegenerationLog& log, const RewardSpecd& spec);

}  // namespace slds
