#include "slds/simulate.hpp"

#include <ostream>
#include <sstream>

#include "slds/format.hpp"

namespace slds {

void check_divergence(const Eigen::Ref<const VectorXd>& x, std::size_t step, double bound) {
  if (!x.allFinite()) {
    throw Divergence("non-finite state at step " + std::to_string(step), step);
  }
  const double norm = x.norm();
  if (norm > bound) {
    throw Divergence("state norm " + format_double(norm) + " exceeded divergence bound at step " +
                         std::to_string(step),
                     step);
  }
}

void step_into(const ClosedLoopd& cl, const SldsModeld& model, const Eigen::Ref<const VectorXd>& x,
               Eigen::Ref<VectorXd> out, RandomStream& rng, bool zero_noise) {
  if (cl.size() != model.num_regions()) {
    throw DimensionMismatch("closed loop and model disagree on the number of regions");
  }
  const std::size_t j = region_of(model, x);
  out.noalias() = cl.ahat(j) * x;
  if (!zero_noise) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += rng.normal();
  }
}

VectorXd step(const ClosedLoopd& cl, const SldsModeld& model, const VectorXd& x, RandomStream& rng,
              const SimulationOptions& options) {
  VectorXd next(x.size());
  step_into(cl, model, x, next, rng, options.zero_noise);
  return next;
}

Trajectory simulate(const ClosedLoopd& cl, const SldsModeld& model, const RewardSpecd& spec,
                    const VectorXd& x0, Eigen::Index horizon, RandomStream& rng,
                    const SimulationOptions& options) {
  if (horizon < 1) throw InvalidArgument("simulate: horizon must be at least 1");
  if (x0.size() != model.n()) throw DimensionMismatch("simulate: x0 has the wrong dimension");
  Trajectory traj;
  traj.seed = rng.seed();
  traj.states.resize(model.n(), horizon);
  traj.rewards.resize(horizon);
  traj.states.col(0) = x0;
  check_divergence(traj.states.col(0), 0, options.divergence_bound);
  for (Eigen::Index t = 0; t + 1 < horizon; ++t) {
    step_into(cl, model, traj.states.col(t), traj.states.col(t + 1), rng, options.zero_noise);
    check_divergence(traj.states.col(t + 1), static_cast<std::size_t>(t + 1),
                     options.divergence_bound);
  }
  for (Eigen::Index t = 0; t < horizon; ++t) traj.rewards(t) = reward(traj.states.col(t), spec);
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "step";
  for (Eigen::Index i = 0; i < traj.states.rows(); ++i) os << ",x_" << i;
  os << ",reward\n";
  for (Eigen::Index t = 0; t < traj.size(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) os << ',' << format_double(traj.states(i, t));
    os << ',' << format_double(traj.rewards(t)) << '\n';
  }
}

}  // namespace slds
