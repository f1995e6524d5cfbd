#pragma once

#include <cstdint>
#include <iosfwd>

#include "slds/core.hpp"
#include "slds/random.hpp"

namespace slds {

struct SimulationOptions {
  /// Debug switch: drop the Gaussian noise term. Never on by default.
  bool zero_noise = false;
  /// Trajectories whose state norm exceeds this are aborted.
  double divergence_bound = 1e150;
};

/// Writes A_{j(x)} x + w into `out`; `out` must not alias `x`.
void step_into(const ClosedLoopd& cl, const SldsModeld& model, const Eigen::Ref<const VectorXd>& x,
               Eigen::Ref<VectorXd> out, RandomStream& rng, bool zero_noise = false);

/// One closed-loop transition from x.
VectorXd step(const ClosedLoopd& cl, const SldsModeld& model, const VectorXd& x, RandomStream& rng,
              const SimulationOptions& options = {});

/// States x_0..x_{N-1} stored as columns, plus r(x_i) for each.
struct Trajectory {
  MatrixXd states;
  VectorXd rewards;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return states.cols(); }
};

Trajectory simulate(const ClosedLoopd& cl, const SldsModeld& model, const RewardSpecd& spec,
                    const VectorXd& x0, Eigen::Index horizon, RandomStream& rng,
                    const SimulationOptions& options = {});

/// CSV with header step,x_0..x_{n-1},reward.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Throws Divergence if x is non-finite or beyond the bound.
void check_divergence(const Eigen::Ref<const VectorXd>& x, std::size_t step, double bound);

}  // namespace slds
