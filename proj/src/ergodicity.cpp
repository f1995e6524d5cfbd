#include "slds/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "slds/format.hpp"
#include "slds/special.hpp"

namespace slds {

bool RegionClassification::is_unbounded(std::size_t j) const {
  return std::find(unbounded_set.begin(), unbounded_set.end(), j) != unbounded_set.end();
}

namespace {

bool probe_hits_exterior(const Regiond& region, Eigen::Index n, double rho, const ProbeOptions& opt) {
  RandomStream rng(opt.seed);
  const double radii[] = {rho * (1.0 + opt.relative_offset), 2.0 * rho, 10.0 * rho, 1e3 * rho,
                          1e6 * rho};
  VectorXd u(n);
  auto hits_along = [&](const VectorXd& dir) {
    for (double r : radii) {
      if (region.contains(r * dir)) return true;
    }
    return false;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      u.setZero();
      u(i) = sign;
      if (hits_along(u)) return true;
    }
  }
  for (std::size_t k = 0; k < opt.directions; ++k) {
    rng.fill_normal(u);
    const double norm = u.norm();
    if (norm == 0.0) continue;
    u /= norm;
    if (hits_along(u)) return true;
  }
  return false;
}

}  // namespace

RegionClassification classify_regions(const SldsModeld& model, double rho_ball,
                                      const ProbeOptions& probe) {
  if (!(rho_ball > 0)) throw InvalidArgument("classify_regions: rho must be positive");
  RegionClassification out;
  const auto& regions = model.regions();
  for (std::size_t j = 0; j < regions.size(); ++j) {
    bool unbounded = false;
    if (const auto* shell = regions[j].shell()) {
      unbounded = shell->r_hi > rho_ball;
    } else {
      const bool hit = probe_hits_exterior(regions[j], model.n(), rho_ball, probe);
      const bool flag = regions[j].declared_unbounded();
      if (hit != flag) {
        throw ClassificationConflict(
            "region " + std::to_string(j) + " is declared " + (flag ? "unbounded" : "bounded") +
            " but probing " + (hit ? "found points" : "found no points") + " outside the ball of radius " +
            format_double(rho_ball));
      }
      unbounded = flag;
    }
    (unbounded ? out.unbounded_set : out.bounded_set).push_back(j);
  }
  if (out.unbounded_set.empty()) {
    throw UncoveredExterior("no region covers points outside the ball of radius " +
                            format_double(rho_ball));
  }
  return out;
}

double SmallSet::log_volume() const { return log_ball_volume(n, radius); }

double Certificate::beta() const { return std::exp(log_beta); }

std::string Certificate::nu_hat_descriptor() const {
  return "uniform on the ball S of radius " + format_double(s_radius) + " in R^" + std::to_string(n);
}

double beta_lower_bound(const ClosedLoopd& cl, double s_radius, Eigen::Index n) {
  if (!(s_radius >= 0)) throw InvalidArgument("beta_lower_bound: radius must be nonnegative");
  const double d = s_radius * (1.0 + cl.max_norm());
  return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * d * d;
}

namespace {

// Radial envelope of the second drift inequality. With t = |x|^2,
// PV^(x) <= 1 + a (n + m t) where m = max(gamma, c) inside the rho-ball and
// gamma outside, and V^(x) = 1 + a t with a = (1 - gamma) / (2n). Both sides
// are affine on each piece, so endpoint checks are exhaustive.
struct Piece {
  double lo;
  double hi;  // may be +inf
  double slope;
};

struct Envelope {
  double a;
  double n;
  std::vector<Piece> pieces;

  double h(double t, double m) const { return 1.0 + a * (n + m * t); }
  double v(double t) const { return 1.0 + a * t; }
};

Envelope make_envelope(const Certificate& cert) {
  const double n = static_cast<double>(cert.n);
  const double rho2 = cert.rho_ball * cert.rho_ball;
  return Envelope{(1.0 - cert.gamma) / (2.0 * n),
                  n,
                  {{0.0, rho2, std::max(cert.gamma, cert.c)},
                   {rho2, std::numeric_limits<double>::infinity(), cert.gamma}}};
}

// Smallest lambda with h(t) <= lambda v(t) for all t > s^2.
double lambda_min_outside(const Envelope& env, double s2, double gamma) {
  double lam = gamma;
  for (const auto& p : env.pieces) {
    const double lo = std::max(p.lo, s2);
    if (!(lo < p.hi)) continue;
    lam = std::max(lam, env.h(lo, p.slope) / env.v(lo));
    if (std::isfinite(p.hi)) lam = std::max(lam, env.h(p.hi, p.slope) / env.v(p.hi));
  }
  return lam;
}

bool inside_holds(const Envelope& env, double s2, double lambda, double K2) {
  for (const auto& p : env.pieces) {
    const double hi = std::min(p.hi, s2);
    if (!(p.lo <= hi)) continue;
    for (double t : {p.lo, hi}) {
      const double lhs = env.h(t, p.slope);
      const double rhs = lambda * env.v(t) + K2;
      if (lhs > rhs * (1.0 + 1e-12)) return false;
    }
  }
  return true;
}

}  // namespace

Certificate certify(const ClosedLoopd& cl, const RegionClassification& classification,
                    double rho_ball, Eigen::Index n, std::optional<double> lambda_choice) {
  if (!(rho_ball > 0)) throw InvalidArgument("certify: rho must be positive");
  if (n != cl.n()) throw DimensionMismatch("certify: n does not match the closed loop");
  const std::size_t M = cl.size();
  if (classification.unbounded_set.size() + classification.bounded_set.size() != M) {
    throw DimensionMismatch("certify: classification does not cover every region");
  }
  if (classification.unbounded_set.empty()) {
    throw UncoveredExterior("certify: no unbounded region");
  }

  Certificate cert;
  cert.n = n;
  cert.rho_ball = rho_ball;
  cert.gamma = -1.0;
  for (std::size_t j : classification.unbounded_set) {
    const double g = cl.ahat_norms()[j] * cl.ahat_norms()[j];
    if (g > cert.gamma) {
      cert.gamma = g;
      cert.gamma_region = j;
    }
  }
  if (cert.gamma >= 1.0) {
    throw NotCertifiable("region " + std::to_string(cert.gamma_region) +
                             " meets the exterior of the rho-ball with |A|^2 = " +
                             format_double(cert.gamma) + " >= 1",
                         cert.gamma_region, cert.gamma);
  }
  cert.c = 0.0;
  for (std::size_t k : classification.bounded_set) {
    const double c = cl.ahat_norms()[k] * cl.ahat_norms()[k];
    if (!cert.c_region || c > cert.c) {
      cert.c = c;
      cert.c_region = k;
    }
  }

  const double dn = static_cast<double>(n);
  const double rho2 = rho_ball * rho_ball;
  cert.K = dn + cert.c * rho2;
  const double gamma_eff = std::max(cert.gamma, kGammaFloor);
  cert.r_hat = 2.0 * cert.K / (gamma_eff * (1.0 - cert.gamma));
  cert.s_radius = std::sqrt(2.0 * (cert.K + 1.0));
  cert.K2 = 1.5 + 2.0 * cert.c + cert.c * cert.c * rho2;

  const Envelope env = make_envelope(cert);
  const double s2 = 2.0 * (cert.K + 1.0);
  cert.lambda_min = lambda_min_outside(env, s2, cert.gamma);
  if (lambda_choice) {
    if (!(*lambda_choice > cert.gamma && *lambda_choice < 1.0)) {
      throw InvalidArgument("certify: lambda must lie in (gamma, 1) = (" + format_double(cert.gamma) +
                            ", 1)");
    }
    cert.lambda = *lambda_choice;
  } else {
    cert.lambda = 0.5 * (1.0 + cert.gamma);
    if (cert.lambda_min < 1.0) cert.lambda = std::max(cert.lambda, cert.lambda_min);
  }
  cert.drift2_verified = cert.lambda >= cert.lambda_min && cert.lambda_min < 1.0 &&
                         inside_holds(env, s2, cert.lambda, cert.K2);

  cert.log_beta = beta_lower_bound(cl, cert.s_radius, n);
  return cert;
}

double v_hat(const Eigen::Ref<const VectorXd>& x, double gamma) {
  return 1.0 + (1.0 - gamma) * x.squaredNorm() / (2.0 * static_cast<double>(x.size()));
}

double expected_next_v(const ClosedLoopd& cl, const SldsModeld& model,
                       const Eigen::Ref<const VectorXd>& x) {
  const std::size_t j = region_of(model, x);
  return (cl.ahat(j) * x).squaredNorm() + static_cast<double>(x.size());
}

DriftReport drift_check(const ClosedLoopd& cl, const SldsModeld& model, const Certificate& cert,
                        const Eigen::Ref<const MatrixXd>& samples) {
  if (samples.rows() != cert.n) throw DimensionMismatch("drift_check: sample dimension");
  // Relative slack for floating-point rounding only.
  constexpr double kRound = 1e-12;
  DriftReport report;
  const double a = (1.0 - cert.gamma) / (2.0 * static_cast<double>(cert.n));
  const double s2 = cert.s_radius * cert.s_radius;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const auto x = samples.col(i);
    const double v = x.squaredNorm();
    const double pv = expected_next_v(cl, model, x);

    const double bound1 = cert.gamma * v + cert.K;
    report.max_margin1 = std::max(report.max_margin1, pv - bound1);
    if (pv > bound1 * (1.0 + kRound)) {
      report.violations.push_back({static_cast<std::size_t>(i), 1, pv, bound1});
    }

    const double pv_hat = 1.0 + a * pv;
    const double bound2 = cert.lambda * (1.0 + a * v) + (v <= s2 ? cert.K2 : 0.0);
    report.max_margin2 = std::max(report.max_margin2, pv_hat - bound2);
    if (pv_hat > bound2 * (1.0 + kRound)) {
      report.violations.push_back({static_cast<std::size_t>(i), 2, pv_hat, bound2});
    }
    ++report.checked;
  }
  return report;
}

Overlap gaussian_overlap(const Eigen::Ref<const VectorXd>& mu1, const Eigen::Ref<const VectorXd>& mu2) {
  if (mu1.size() != mu2.size()) throw DimensionMismatch("gaussian_overlap: mean dimensions differ");
  const double d = (mu1 - mu2).norm();
  Overlap o;
  // 2 Phi(-d/2) = erfc(d / (2 sqrt 2))
  const double z = d / (2.0 * std::numbers::sqrt2);
  o.alpha = std::erfc(z);
  o.log_alpha = log_erfc(z);
  o.tv = 2.0 * (1.0 - o.alpha);
  return o;
}

OverlapReport overlap_positivity_check(const ClosedLoopd& cl, const SldsModeld& model,
                                       const Certificate& cert, std::size_t n_pairs,
                                       RandomStream& rng) {
  const Eigen::Index n = cert.n;
  OverlapReport report;
  report.min_log_alpha = 0.0;
  VectorXd z(2 * n);
  const double radius = std::sqrt(cert.r_hat);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    // Uniform point in the 2n-ball of radius sqrt(r_hat).
    rng.fill_normal(z);
    z /= z.norm();
    z *= radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(2 * n));
    const VectorXd x = z.head(n);
    const VectorXd y = z.tail(n);
    const bool x_in = x.norm() <= cert.rho_ball;
    const bool y_in = y.norm() <= cert.rho_ball;
    ++report.case_counts[x_in && y_in ? 0 : (x_in || y_in ? 1 : 2)];

    const VectorXd mx = cl.ahat(region_of(model, x)) * x;
    const VectorXd my = cl.ahat(region_of(model, y)) * y;
    const Overlap o = gaussian_overlap(mx, my);
    if (!std::isfinite(o.log_alpha)) ++report.non_positive;
    report.min_log_alpha = std::min(report.min_log_alpha, o.log_alpha);
    ++report.pairs;
  }
  return report;
}

double log_transition_box_probability(const ClosedLoopd& cl, const SldsModeld& model,
                                      const Eigen::Ref<const VectorXd>& x, const Box& box) {
  if (box.lo.size() != x.size() || box.hi.size() != x.size()) {
    throw DimensionMismatch("box dimension does not match the state");
  }
  const VectorXd mean = cl.ahat(region_of(model, x)) * x;
  double log_p = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    log_p += log_normal_interval(box.lo(i) - mean(i), box.hi(i) - mean(i));
  }
  return log_p;
}

namespace {

double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double result = 0.0;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return result;
}

}  // namespace

double log_nu_hat_box(const SmallSet& set, const Box& box, std::size_t qmc_points) {
  const Eigen::Index n = set.n;
  if (box.lo.size() != n || box.hi.size() != n) throw DimensionMismatch("box dimension");
  if (n > 3) throw InvalidArgument("log_nu_hat_box supports n <= 3");
  const VectorXd width = box.hi - box.lo;
  if ((width.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  const double log_box_volume = width.array().log().sum();

  const VectorXd c = set.centre_or_origin();
  // Farthest corner inside the ball means the whole box is.
  const VectorXd far = (box.lo - c).cwiseAbs().cwiseMax((box.hi - c).cwiseAbs());
  if (far.norm() <= set.radius) return log_box_volume - set.log_volume();

  static constexpr unsigned kPrimes[] = {2, 3, 5};
  std::size_t inside = 0;
  VectorXd p(n);
  for (std::size_t k = 1; k <= qmc_points; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = box.lo(i) + width(i) * radical_inverse(k, kPrimes[i]);
    }
    if ((p - c).norm() <= set.radius) ++inside;
  }
  if (inside == 0) return -std::numeric_limits<double>::infinity();
  return std::log(static_cast<double>(inside) / static_cast<double>(qmc_points)) + log_box_volume -
         set.log_volume();
}

MinorizationReport minorization_check(const ClosedLoopd& cl, const SldsModeld& model,
                                      const SmallSet& set, const std::vector<Box>& boxes,
                                      const std::vector<VectorXd>& points) {
  if (set.n > 3) throw InvalidArgument("minorization_check is limited to n <= 3");
  MinorizationReport report;
  std::vector<double> log_nu;
  log_nu.reserve(boxes.size());
  for (const auto& b : boxes) log_nu.push_back(log_nu_hat_box(set, b));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!set.contains(points[i])) throw InvalidArgument("minorization_check: point outside S");
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      ++report.checked;
      const double rhs = set.log_beta + log_nu[k];
      if (std::isinf(rhs) && rhs < 0) continue;  // null set
      const double lp = log_transition_box_probability(cl, model, points[i], boxes[k]);
      report.min_slack = std::min(report.min_slack, lp - rhs);
      if (lp < rhs) report.violations.push_back({i, k, lp, rhs});
    }
  }
  return report;
}

void write_certificate_report(std::ostream& os, const Certificate& cert, const DriftReport* drift,
                              const OverlapReport* overlap) {
  auto line = [&](const char* key, double v) { os << key << " = " << format_double(v) << '\n'; };
  os << "# ergodicity certificate\n";
  os << "n = " << cert.n << '\n';
  line("rho_ball", cert.rho_ball);
  line("gamma", cert.gamma);
  os << "gamma_region = " << cert.gamma_region << '\n';
  line("c", cert.c);
  line("K", cert.K);
  line("r_hat", cert.r_hat);
  line("s_radius", cert.s_radius);
  line("lambda", cert.lambda);
  line("lambda_min", cert.lambda_min);
  line("K2", cert.K2);
  line("log_beta", cert.log_beta);
  os << "nu_hat = " << cert.nu_hat_descriptor() << '\n';
  os << "condition_gamma_lt_1 = PASS\n";
  os << "condition_r_hat_gt_2K_over_1_minus_gamma = "
     << (cert.r_hat > 2.0 * cert.K / (1.0 - cert.gamma) ? "PASS" : "FAIL") << '\n';
  os << "condition_drift2_envelope = " << (cert.drift2_verified ? "PASS" : "FAIL") << '\n';
  os << "condition_beta_in_0_1 = " << (std::isfinite(cert.log_beta) && cert.log_beta < 0 ? "PASS" : "FAIL")
     << '\n';
  if (drift) {
    os << "drift_samples = " << drift->checked << '\n';
    os << "drift_violations = " << drift->violations.size() << '\n';
    os << "condition_drift_samples = " << (drift->ok() ? "PASS" : "FAIL") << '\n';
  }
  if (overlap) {
    os << "overlap_pairs = " << overlap->pairs << '\n';
    line("overlap_min_log_alpha", overlap->min_log_alpha);
    os << "condition_overlap_positive = " << (overlap->ok() ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace slds
