#include "slds/bounds.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "slds/format.hpp"
#include "slds/parallel.hpp"
#include "slds/random.hpp"
#include "slds/simulate.hpp"
#include "slds/stats.hpp"

namespace slds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this exp() leaves the normal range and the direct quotient loses precision.
constexpr double kLogNormalMin = -700.0;

void check_eps_delta(double eps, double delta) {
  if (!(eps > 0)) throw InvalidArgument("eps must be positive");
  if (!(delta > 0 && delta < 1)) throw InvalidArgument("delta must lie in (0, 1)");
}

void check_gamma(double gamma) {
  if (!(gamma >= 0 && gamma < 1)) throw InvalidArgument("gamma must lie in [0, 1)");
}

}  // namespace

void BoundConstants::validate() const {
  for (double v : {c_10as, c_1_sq, c_2as0, c_2as20, o1, o2, o3, leading_C}) {
    if (!(v >= 0) || !std::isfinite(v)) {
      throw InvalidArgument("bound constants must be finite and nonnegative");
    }
  }
}

SampleRequirement required_samples_beta(double beta, double gamma, double eps, double delta,
                                        Eigen::Index n, double x0_norm_sq,
                                        const BoundConstants& consts) {
  check_eps_delta(eps, delta);
  check_gamma(gamma);
  consts.validate();
  if (!(beta > 0 && beta <= 1)) throw InvalidArgument("beta must lie in (0, 1]");
  const double num = consts.o1 * (consts.o2 * static_cast<double>(n) + consts.o3 + gamma * x0_norm_sq);
  SampleRequirement out;
  out.log_beta = std::log(beta);
  out.n_real = num / ((1.0 - gamma) * delta * beta * (eps * eps));
  out.log_n = std::log(out.n_real);
  out.n_required = std::isfinite(out.n_real) ? std::max(1.0, std::ceil(out.n_real)) : kInf;
  return out;
}

SampleRequirement required_samples_at(double log_beta, double gamma, double eps, double delta,
                                      Eigen::Index n, double x0_norm_sq,
                                      const BoundConstants& consts) {
  check_eps_delta(eps, delta);
  check_gamma(gamma);
  consts.validate();
  if (!(log_beta <= 0)) throw InvalidArgument("log beta must be <= 0");
  const double num = consts.o1 * (consts.o2 * static_cast<double>(n) + consts.o3 + gamma * x0_norm_sq);
  if (log_beta > kLogNormalMin) {
    return required_samples_beta(std::exp(log_beta), gamma, eps, delta, n, x0_norm_sq, consts);
  }
  SampleRequirement out;
  out.log_beta = log_beta;
  out.log_n = std::log(num) - std::log1p(-gamma) - std::log(delta) - log_beta - 2.0 * std::log(eps);
  out.n_real = std::exp(out.log_n);
  out.n_required = std::isfinite(out.n_real) ? std::max(1.0, std::ceil(out.n_real)) : kInf;
  return out;
}

RequiredSamples required_samples(const Certificate& cert, double eps, double delta, Eigen::Index n,
                                 double x0_norm_sq, const BoundConstants& consts,
                                 std::optional<double> log_beta_op) {
  RequiredSamples out;
  out.paper = required_samples_at(cert.log_beta, cert.gamma, eps, delta, n, x0_norm_sq, consts);
  if (log_beta_op) {
    out.operational = required_samples_at(*log_beta_op, cert.gamma, eps, delta, n, x0_norm_sq, consts);
  }
  return out;
}

double omega_form(double log_beta, double gamma, double eps, double delta, Eigen::Index n,
                  const BoundConstants& consts) {
  check_eps_delta(eps, delta);
  check_gamma(gamma);
  const double log_v = std::log(consts.leading_C * static_cast<double>(n)) - log_beta -
                       2.0 * std::log(eps) - std::log(delta) - std::log1p(-gamma);
  return std::exp(log_v);
}

BoundReport bound_terms(const Certificate& cert, Eigen::Index n, double N, double x0_norm_sq,
                        const BoundConstants& consts, std::optional<double> log_beta,
                        std::optional<double> eps, std::optional<double> delta) {
  if (!(N >= 1)) throw InvalidArgument("bound_terms: N must be at least 1");
  consts.validate();
  const double g = cert.gamma;
  check_gamma(g);
  const double c = cert.c;
  const double rho2 = cert.rho_ball * cert.rho_ball;
  const double rho4 = rho2 * rho2;
  const double dn = static_cast<double>(n);
  const double x2 = x0_norm_sq;
  const double om = 1.0 - g;

  BoundReport r;
  r.N = N;
  r.log_beta = log_beta.value_or(cert.log_beta);
  r.pi_vhat_bound = 1.5 + c * rho2 / (2.0 * dn);
  r.rbar_vhat_bound = 2.0 * dn / om;
  r.ex_vhat_bound = r.pi_vhat_bound + om * g * x2 / (2.0 * dn);

  r.term_p26 = 4.0 * (consts.c_10as / N) * ((6.0 * dn + 2.0 * c * rho2 + g * x2) / om);
  r.term_p27 = 4.0 * (consts.c_1_sq / (N * N)) * ((3.0 * dn + c * rho2 + g * om * x2) / om);
  r.term_p28 = consts.c_2as0 * (18.0 / 4.0 * dn + c * c * rho4 + 3.0 * c * rho2) / (N * N * om);
  r.term_p29 = consts.c_2as20 *
               (27.0 / 4.0 * dn + 3.0 * c * c * rho2 / 4.0 + 27.0 * c * rho2 / 4.0 +
                c * c * c * rho4 / 4.0 + 3.0 * c * c * rho4 / 2.0) /
               (om * N * N * N);
  const double lead = 1.0 + std::sqrt(g) * std::sqrt(om) * std::sqrt(2.0 + c * rho2);
  r.log_term_p30 = std::log(4.0 * lead) + std::log(3.0 * dn + c * rho2) - std::log(N) - r.log_beta -
                   2.0 * std::log(om);
  r.term_p30 = std::exp(r.log_term_p30);
  r.mse_bound = r.term_p26 + r.term_p27 + r.term_p28 + r.term_p29 + r.term_p30;
  if (eps && delta) {
    r.n_required = required_samples_at(r.log_beta, g, *eps, *delta, n, x2, consts).n_required;
  } else {
    r.n_required = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

void write_bound_report(std::ostream& os, const BoundReport& r) {
  os << "N: " << format_double(r.N) << '\n'
     << "log_beta: " << format_double(r.log_beta) << '\n'
     << "pi_vhat_bound: " << format_double(r.pi_vhat_bound) << '\n'
     << "rbar_vhat_bound: " << format_double(r.rbar_vhat_bound) << '\n'
     << "ex_vhat_bound: " << format_double(r.ex_vhat_bound) << '\n'
     << "term_p26: " << format_double(r.term_p26) << '\n'
     << "term_p27: " << format_double(r.term_p27) << '\n'
     << "term_p28: " << format_double(r.term_p28) << '\n'
     << "term_p29: " << format_double(r.term_p29) << '\n'
     << "term_p30: " << format_double(r.term_p30) << '\n'
     << "log_term_p30: " << format_double(r.log_term_p30) << '\n'
     << "mse_bound: " << format_double(r.mse_bound) << '\n'
     << "n_required: " << format_double(r.n_required) << '\n';
}

void write_bound_csv_header(std::ostream& os) {
  os << "N,log_beta,pi_vhat_bound,rbar_vhat_bound,ex_vhat_bound,term_p26,term_p27,term_p28,"
        "term_p29,term_p30,log_term_p30,mse_bound,n_required\n";
}

void write_bound_csv_row(std::ostream& os, const BoundReport& r) {
  const double v[] = {r.N,        r.log_beta, r.pi_vhat_bound, r.rbar_vhat_bound, r.ex_vhat_bound,
                      r.term_p26, r.term_p27, r.term_p28,      r.term_p29,        r.term_p30,
                      r.log_term_p30, r.mse_bound, r.n_required};
  for (std::size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << format_double(v[i]);
  os << '\n';
}

ReferenceValue reference_reward(const ClosedLoopd& cl, const SldsModeld& model,
                                const RewardSpecd& spec, const VectorXd& x0, std::size_t steps,
                                std::uint64_t seed, std::size_t burn_in, std::size_t batches) {
  if (steps < batches || batches < 2) throw InvalidArgument("reference run too short for its batches");
  RandomStream rng(seed);
  VectorXd a = x0;
  VectorXd b(x0.size());
  for (std::size_t t = 0; t < burn_in; ++t) {
    step_into(cl, model, a, b, rng);
    a.swap(b);
  }
  const std::size_t per_batch = steps / batches;
  std::vector<double> means(batches);
  double total = 0.0;
  for (std::size_t k = 0; k < batches; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t < per_batch; ++t) {
      s += reward(a, spec);
      step_into(cl, model, a, b, rng);
      a.swap(b);
    }
    check_divergence(a, burn_in + (k + 1) * per_batch, 1e150);
    means[k] = s / static_cast<double>(per_batch);
    total += s;
  }
  ReferenceValue out;
  out.steps = per_batch * batches;
  out.mean = total / static_cast<double>(out.steps);
  out.standard_error = mean_stderr(means).stderr_;
  return out;
}

ValidationResult validate_bound(const ClosedLoopd& cl, const SldsModeld& model,
                                const RewardSpecd& spec, Eigen::Index N, double eps, double delta,
                                std::size_t trials, double rho_star, const VectorXd& x0,
                                std::uint64_t master_seed, std::size_t threads) {
  check_eps_delta(eps, delta);
  if (N < 1 || trials < 1) throw InvalidArgument("validate_bound needs N >= 1 and trials >= 1");
  std::vector<std::uint8_t> missed(trials, 0);
  parallel_for(trials, threads, [&](std::size_t trial) {
    RandomStream rng(derive_seed(master_seed, {trial}));
    VectorXd a = x0;
    VectorXd b(x0.size());
    double s = 0.0;
    for (Eigen::Index t = 0; t < N; ++t) {
      s += reward(a, spec);
      if (t + 1 < N) {
        step_into(cl, model, a, b, rng);
        a.swap(b);
      }
    }
    check_divergence(a, static_cast<std::size_t>(N), 1e150);
    missed[trial] = std::abs(s / static_cast<double>(N) - rho_star) > eps ? 1 : 0;
  });
  ValidationResult out;
  out.trials = trials;
  out.N = static_cast<double>(N);
  for (auto m : missed) out.failures += m;
  out.failure_rate = static_cast<double>(out.failures) / static_cast<double>(trials);
  out.threshold = delta + 2.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
  out.passed = out.failure_rate <= out.threshold;
  return out;
}

}  // namespace slds
