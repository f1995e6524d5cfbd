#include "slds/regen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "slds/format.hpp"
#include "slds/simulate.hpp"
#include "slds/special.hpp"

namespace slds {

namespace {

double half_log_two_pi(Eigen::Index n) {
  return 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

}  // namespace

SmallSet operational_small_set(const ClosedLoopd& cl, double radius) {
  if (!(radius > 0)) throw InvalidArgument("operational small set needs a positive radius");
  SmallSet set;
  set.n = cl.n();
  set.radius = radius;
  set.log_beta = beta_lower_bound(cl, radius, cl.n()) + std::min(0.0, set.log_volume());
  return set;
}

namespace {

// Can region j meet the closed ball B(m, r)? Exact for shells, "yes" for polyhedra.
bool may_meet_ball(const Regiond& region, const VectorXd& m, double r) {
  const auto* s = region.shell();
  if (!s) return true;
  const double d = m.norm();
  return d - r <= s->r_hi && d + r >= s->r_lo;
}

struct CentreTerms {
  double a = 0;  // max |A_j| over regions meeting the ball
  double b = 0;  // max |(I - A_j) m|
};

CentreTerms centre_terms(const ClosedLoopd& cl, const SldsModeld& model, double radius,
                         const VectorXd& m) {
  CentreTerms t;
  for (std::size_t j = 0; j < cl.size(); ++j) {
    if (!may_meet_ball(model.regions()[j], m, radius)) continue;
    t.a = std::max(t.a, cl.ahat_norms()[j]);
    t.b = std::max(t.b, (m - cl.ahat(j) * m).norm());
  }
  return t;
}

}  // namespace

SmallSet operational_small_set(const ClosedLoopd& cl, const SldsModeld& model, double radius,
                               const VectorXd& center) {
  if (!(radius > 0)) throw InvalidArgument("operational small set needs a positive radius");
  if (center.size() != cl.n()) throw DimensionMismatch("small-set center dimension");
  if (center.isZero(0.0)) return operational_small_set(cl, radius);
  const auto t = centre_terms(cl, model, radius, center);
  const double d = radius * (1.0 + t.a) + t.b;
  SmallSet set;
  set.n = cl.n();
  set.radius = radius;
  set.center = center;
  set.log_beta = -half_log_two_pi(cl.n()) - 0.5 * d * d + std::min(0.0, set.log_volume());
  return set;
}

double default_operational_radius(const ClosedLoopd& cl, const SldsModeld& model,
                                  const VectorXd& center, double target_log_beta) {
  if (center.size() != cl.n()) throw DimensionMismatch("small-set center dimension");
  if (center.isZero(0.0)) return default_operational_radius(cl, target_log_beta);
  const double budget = -target_log_beta - half_log_two_pi(cl.n());
  if (!(budget > 0)) throw InvalidArgument("target log beta is above -(n/2) log(2 pi)");
  const double dmax = std::sqrt(2.0 * budget);
  // D(r) is nondecreasing in r (more regions meet a bigger ball): bisect for
  // the largest r with D(r) <= dmax.
  const auto d_of = [&](double r) {
    const auto t = centre_terms(cl, model, r, center);
    return r * (1.0 + t.a) + t.b;
  };
  double lo = 0.0;
  double hi = dmax;
  if (d_of(hi) <= dmax) return hi;
  if (d_of(dmax * 1e-9) > dmax) {
    throw InvalidArgument("no ball around the given center reaches log beta " +
                          format_double(target_log_beta));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * dmax; ++it) {
    const double mid = 0.5 * (lo + hi);
    (d_of(mid) <= dmax ? lo : hi) = mid;
  }
  return lo;
}

double default_operational_radius(const ClosedLoopd& cl, double target_log_beta) {
  const double budget = -target_log_beta - half_log_two_pi(cl.n());
  const double scale = 1.0 + cl.max_norm();
  if (budget > 0) return std::sqrt(2.0 * budget) / scale;
  return 1.0 / scale;
}

SplitScheme SplitScheme::ball(const SmallSet& set, std::optional<double> beta) {
  SplitScheme s;
  s.kind_ = Kind::Ball;
  s.set_ = set;
  const double bound = std::exp(set.log_beta);
  s.beta_ = beta.value_or(bound);
  if (!(s.beta_ >= 0.0 && s.beta_ < 1.0)) {
    throw InvalidArgument("operational beta must lie in [0, 1)");
  }
  if (s.beta_ > bound * (1.0 + 1e-12)) {
    throw InvalidArgument("operational beta " + format_double(s.beta_) +
                          " exceeds the minorization bound " + format_double(bound));
  }
  return s;
}

SplitScheme SplitScheme::iid_debug(const ClosedLoopd& cl) {
  for (const auto& a : cl.ahat()) {
    if (!a.isZero(0.0)) {
      throw InvalidArgument("i.i.d. debug splitting requires every closed-loop matrix to be zero");
    }
  }
  SplitScheme s;
  s.kind_ = Kind::IidDebug;
  s.set_.n = cl.n();
  s.set_.radius = std::numeric_limits<double>::infinity();
  s.set_.log_beta = 0.0;
  s.beta_ = 1.0;
  return s;
}

VectorXd sample_nu_hat(const SmallSet& set, RandomStream& rng) {
  VectorXd x = rng.normal_vector(set.n);
  const double norm = x.norm();
  if (norm != 0.0) {
    const double r = set.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(set.n));
    x *= r / norm;
  }
  if (set.center.size() != 0) x += set.center;
  return x;
}

VectorXd sample_nu_hat(const Certificate& cert, RandomStream& rng) {
  return sample_nu_hat(cert.small_set(), rng);
}

SplitValidity validate_split(const ClosedLoopd& cl, const SldsModeld& model,
                             const SplitScheme& scheme, std::size_t grid, RandomStream& rng) {
  SplitValidity v;
  if (scheme.kind() == SplitScheme::Kind::IidDebug) {
    v.max_log_ratio = 0.0;
    v.pairs = 1;
    return v;
  }
  const auto& set = scheme.set();
  if (scheme.beta() == 0.0) {
    v.pairs = 1;
    return v;
  }
  const double log_q = std::log(scheme.beta()) - set.log_volume();
  const VectorXd c = set.centre_or_origin();
  std::vector<VectorXd> xs;
  std::vector<VectorXd> ys;
  xs.push_back(c);
  for (std::size_t k = 0; k < grid; ++k) {
    VectorXd u = rng.normal_vector(set.n);
    u /= u.norm();
    // Boundary points realise the extreme distances; interior points fill in.
    xs.push_back(c + set.radius * u);
    ys.push_back(c - set.radius * u);
    xs.push_back(sample_nu_hat(set, rng));
    ys.push_back(sample_nu_hat(set, rng));
  }
  for (const auto& x : xs) {
    const std::size_t j = region_of(model, x);
    const VectorXd mean = cl.ahat(j) * x;
    // Point of S farthest from the mean.
    std::vector<VectorXd> candidates = ys;
    const VectorXd away = c - mean;
    if (away.norm() > 0) candidates.push_back(c + set.radius * away.normalized());
    for (const auto& y : candidates) {
      const double log_p = -half_log_two_pi(set.n) - 0.5 * (y - mean).squaredNorm();
      v.max_log_ratio = std::max(v.max_log_ratio, log_q - log_p);
      ++v.pairs;
    }
  }
  return v;
}

int split_step_into(const ClosedLoopd& cl, const SldsModeld& model, const SplitScheme& scheme,
                    const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out,
                    RandomStream& rng) {
  if (!scheme.in_set(x) || scheme.beta() == 0.0) {
    step_into(cl, model, x, out, rng);
    return 0;
  }
  if (scheme.kind() == SplitScheme::Kind::IidDebug) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = rng.normal();
    return 1;
  }
  if (rng.bernoulli(scheme.beta())) {
    out = sample_nu_hat(scheme.set(), rng);
    return 1;
  }
  // Residual kernel by rejection: propose y ~ P(x, .) and keep it with
  // probability 1 - beta q(y) / p_x(y).
  const auto& set = scheme.set();
  const double log_c = scheme.beta() > 0.0
                           ? std::log(scheme.beta()) - set.log_volume() + half_log_two_pi(set.n)
                           : -std::numeric_limits<double>::infinity();
  const std::size_t j = region_of(model, x);
  for (std::size_t k = 0; k < kMaxRejections; ++k) {
    out.noalias() = cl.ahat(j) * x;
    double w2 = 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double w = rng.normal();
      out(i) += w;
      w2 += w * w;
    }
    if (!set.contains(out)) return 0;
    const double reject = std::exp(log_c + 0.5 * w2);
    if (rng.uniform() >= reject) return 0;
  }
  throw RejectionStall("residual sampler rejected " + std::to_string(kMaxRejections) +
                       " proposals in a row; beta is not a valid minorization constant");
}

std::pair<SplitState, VectorXd> split_step(const ClosedLoopd& cl, const SldsModeld& model,
                                           const SplitScheme& scheme, const VectorXd& x,
                                           RandomStream& rng) {
  VectorXd next(x.size());
  const int theta = split_step_into(cl, model, scheme, x, next, rng);
  return {SplitState{x, theta}, std::move(next)};
}

RegenerationLog RegenerationLog::from_chain(MatrixXd states, std::vector<std::uint8_t> thetas,
                                            Eigen::Index horizon, bool x0_from_nu_hat) {
  if (states.cols() < 1 || static_cast<Eigen::Index>(thetas.size()) != states.cols() - 1) {
    throw DimensionMismatch("regeneration log needs one theta per transition");
  }
  if (horizon < 1 || horizon > states.cols()) {
    throw InvalidArgument("regeneration log horizon must be within the recorded states");
  }
  RegenerationLog log;
  log.states_ = std::move(states);
  log.thetas_ = std::move(thetas);
  log.horizon_ = horizon;
  log.x0_from_nu_hat_ = x0_from_nu_hat;
  for (std::size_t t = 1; t <= log.thetas_.size(); ++t) {
    if (log.thetas_[t - 1]) log.taus_.push_back(static_cast<Eigen::Index>(t));
  }
  for (std::size_t k = 0; k < log.taus_.size(); ++k) {
    if (log.taus_[k] > horizon) {
      log.r_of_n_ = k + 1;
      break;
    }
  }
  return log;
}

std::optional<Eigen::Index> RegenerationLog::tau_r() const {
  if (!r_of_n_) return std::nullopt;
  return taus_[*r_of_n_ - 1];
}

std::optional<Eigen::Index> RegenerationLog::delta_n() const {
  if (auto t = tau_r()) return *t - horizon_;
  return std::nullopt;
}

std::vector<Eigen::Index> RegenerationLog::excursions() const {
  std::vector<Eigen::Index> out;
  out.reserve(taus_.size());
  Eigen::Index prev = 0;
  for (Eigen::Index t : taus_) {
    out.push_back(t - prev);
    prev = t;
  }
  return out;
}

std::vector<Block> RegenerationLog::blocks() const {
  std::vector<Block> out;
  for (std::size_t k = 0; k + 1 < taus_.size(); ++k) out.push_back({taus_[k], taus_[k + 1]});
  return out;
}

std::vector<Block> RegenerationLog::complete_blocks() const {
  std::vector<Block> out;
  if (taus_.empty()) return out;
  if (x0_from_nu_hat_ && taus_.front() <= horizon_) out.push_back({0, taus_.front()});
  for (std::size_t k = 0; k + 1 < taus_.size(); ++k) {
    if (taus_[k + 1] > horizon_) break;
    out.push_back({taus_[k], taus_[k + 1]});
  }
  return out;
}

RegenerationLog simulate_regenerative(const ClosedLoopd& cl, const SldsModeld& model,
                                      const SplitScheme& scheme, Eigen::Index horizon,
                                      RandomStream& rng, const RegenOptions& options) {
  if (horizon < 2) throw InvalidArgument("simulate_regenerative: horizon must be at least 2");
  const Eigen::Index n = model.n();
  MatrixXd states(n, horizon + 2);
  std::vector<std::uint8_t> thetas;
  thetas.reserve(static_cast<std::size_t>(horizon + 1));

  if (options.start == RegenOptions::Start::NuHat) {
    states.col(0) = scheme.kind() == SplitScheme::Kind::IidDebug ? rng.normal_vector(n)
                                                                  : sample_nu_hat(scheme.set(), rng);
  } else {
    if (options.x0.size() != n) throw DimensionMismatch("simulate_regenerative: x0 dimension");
    states.col(0) = options.x0;
  }

  Eigen::Index t = 0;
  for (;; ++t) {
    if (t + 1 >= states.cols()) states.conservativeResize(Eigen::NoChange, 2 * states.cols());
    const int theta = split_step_into(cl, model, scheme, states.col(t), states.col(t + 1), rng);
    check_divergence(states.col(t + 1), static_cast<std::size_t>(t + 1), options.divergence_bound);
    thetas.push_back(static_cast<std::uint8_t>(theta));
    if (t >= horizon && (theta == 1 || t >= horizon + options.max_extension)) break;
  }
  states.conservativeResize(Eigen::NoChange, t + 2);
  return RegenerationLog::from_chain(std::move(states), std::move(thetas), horizon,
                                     options.start == RegenOptions::Start::NuHat);
}

VectorXd log_rewards(const RegenerationLog& log, const RewardSpecd& spec) {
  const auto& s = log.states();
  VectorXd r(s.cols());
  for (Eigen::Index i = 0; i < s.cols(); ++i) r(i) = reward(s.col(i), spec);
  return r;
}

namespace {

struct BlockSums {
  std::vector<double> sums;
  std::vector<double> lengths;
};

BlockSums block_sums(const std::vector<Block>& blocks, const VectorXd& values) {
  BlockSums out;
  out.sums.reserve(blocks.size());
  out.lengths.reserve(blocks.size());
  for (const auto& b : blocks) {
    out.sums.push_back(values.segment(b.begin, b.length()).sum());
    out.lengths.push_back(static_cast<double>(b.length()));
  }
  return out;
}

}  // namespace

EstimatorOutput estimate_reward(const RegenerationLog& log, const RewardSpecd& spec,
                                std::size_t bootstrap_resamples, std::uint64_t bootstrap_seed) {
  EstimatorOutput out;
  const VectorXd r = log_rewards(log, spec);
  const Eigen::Index N = log.horizon();
  out.reward_timeavg = r.head(N).mean();
  const auto blocks = log.complete_blocks();
  out.block_count = blocks.size();
  out.sigma2_as = std::numeric_limits<double>::quiet_NaN();
  out.standard_error = std::numeric_limits<double>::quiet_NaN();
  if (log.taus().empty()) {
    out.warnings.push_back("no regeneration observed; reporting the plain time average");
    return out;
  }
  if (blocks.size() < kMinBlocks) {
    out.warnings.push_back("only " + std::to_string(blocks.size()) +
                           " complete blocks; standard error not reported");
    return out;
  }
  const BlockSums bs = block_sums(blocks, r);
  RandomStream rng(bootstrap_seed);
  std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t b = 0; b < bootstrap_resamples; ++b) {
    double s = 0.0;
    double l = 0.0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const std::size_t i = pick(rng.engine());
      s += bs.sums[i];
      l += bs.lengths[i];
    }
    const double est = s / l;
    const double delta = est - mean;
    mean += delta / static_cast<double>(b + 1);
    m2 += delta * (est - mean);
  }
  out.standard_error = std::sqrt(m2 / static_cast<double>(bootstrap_resamples - 1));
  return out;
}

double estimate_invariant_prob(const RegenerationLog& log, const StatePredicate& in_set) {
  const auto blocks = log.complete_blocks();
  if (blocks.size() < 2) {
    throw InsufficientBlocks("ratio estimator needs at least 2 complete blocks, have " +
                             std::to_string(blocks.size()));
  }
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& b : blocks) {
    for (Eigen::Index i = b.begin; i < b.end; ++i) hits += in_set(log.states().col(i)) ? 1 : 0;
    total += static_cast<std::size_t>(b.length());
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

double estimate_sigma2_as(const RegenerationLog& log, const RewardSpecd& spec, double rho_hat) {
  const auto blocks = log.complete_blocks();
  if (blocks.size() < kMinBlocks) {
    throw InsufficientBlocks("sigma^2_as needs at least " + std::to_string(kMinBlocks) +
                             " complete blocks, have " + std::to_string(blocks.size()));
  }
  const VectorXd centred = log_rewards(log, spec).array() - rho_hat;
  const BlockSums bs = block_sums(blocks, centred);
  double sq = 0.0;
  double len = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    sq += bs.sums[k] * bs.sums[k];
    len += bs.lengths[k];
  }
  return sq / len;  // (mean of squares) / (mean length)
}

double estimate_sigma2_as_streaming(const RegenerationLog& log, const RewardSpecd& spec) {
  const auto blocks = log.complete_blocks();
  if (blocks.size() < kMinBlocks) {
    throw InsufficientBlocks("sigma^2_as needs at least " + std::to_string(kMinBlocks) +
                             " complete blocks, have " + std::to_string(blocks.size()));
  }
  const auto& s = log.states();
  double sum_s = 0, sum_l = 0, sum_ss = 0, sum_sl = 0, sum_ll = 0;
  for (const auto& b : blocks) {
    double block = 0.0;
    for (Eigen::Index i = b.begin; i < b.end; ++i) block += reward(s.col(i), spec);
    const double l = static_cast<double>(b.length());
    sum_s += block;
    sum_l += l;
    sum_ss += block * block;
    sum_sl += block * l;
    sum_ll += l * l;
  }
  const double rho = sum_s / sum_l;
  return (sum_ss - 2.0 * rho * sum_sl + rho * rho * sum_ll) / sum_l;
}

SumDecomposition decompose_sum(const RegenerationLog& log, const VectorXd& rewards, double rho_hat) {
  const auto tau_r = log.tau_r();
  if (log.taus().empty() || !tau_r) {
    throw NoRegeneration("sum decomposition needs a regeneration after the horizon");
  }
  if (rewards.size() < *tau_r) throw DimensionMismatch("decompose_sum: reward vector too short");
  const Eigen::Index N = log.horizon();
  const Eigen::Index tau1 = log.taus().front();
  const auto centred_sum = [&](Eigen::Index begin, Eigen::Index end) {
    double s = 0.0;
    for (Eigen::Index i = begin; i < end; ++i) s += rewards(i) - rho_hat;
    return s;
  };
  SumDecomposition d;
  d.O1 = centred_sum(0, tau1);
  d.Z = centred_sum(tau1, *tau_r);
  d.O2 = centred_sum(N, *tau_r);
  d.direct = centred_sum(0, N);
  return d;
}

SumDecomposition decompose_sum(const RegenerationLog& log, const RewardSpecd& spec, double rho_hat) {
  return decompose_sum(log, log_rewards(log, spec), rho_hat);
}

EstimatorOutput estimate_all(const RegenerationLog& log, const RewardSpecd& spec,
                             const SplitScheme& scheme) {
  EstimatorOutput out = estimate_reward(log, spec);
  if (out.block_count >= kMinBlocks) {
    out.sigma2_as = estimate_sigma2_as(log, spec, out.reward_timeavg);
  }
  if (out.block_count >= 2) {
    out.ratio_estimates.emplace_back(
        "S", estimate_invariant_prob(log, [&](const Eigen::Ref<const VectorXd>& x) {
          return scheme.in_set(x);
        }));
  }
  return out;
}

void write_blocks_csv(std::ostream& os, const RegenerationLog& log, const RewardSpecd& spec) {
  const VectorXd r = log_rewards(log, spec);
  const auto& taus = log.taus();
  os << "m,tau_m,T_m,block_reward_sum\n";
  for (const auto& b : log.complete_blocks()) {
    if (b.begin == 0) {
      os << 0 << ',' << 0 << ',' << 0 << ',' << format_double(r.segment(0, b.length()).sum()) << '\n';
      continue;
    }
    const auto it = std::lower_bound(taus.begin(), taus.end(), b.begin);
    const std::size_t m = static_cast<std::size_t>(it - taus.begin()) + 1;
    const Eigen::Index prev = m >= 2 ? taus[m - 2] : 0;
    os << m << ',' << b.begin << ',' << (b.begin - prev) << ','
       << format_double(r.segment(b.begin, b.length()).sum()) << '\n';
  }
}

}  // namespace slds
