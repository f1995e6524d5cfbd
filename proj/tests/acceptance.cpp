// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "slds/bench.hpp"
#include "slds/bounds.hpp"
#include "slds/ergodicity.hpp"
#include "slds/format.hpp"
#include "slds/parallel.hpp"
#include "slds/regen.hpp"
#include "slds/simulate.hpp"
#include "slds/special.hpp"
#include "slds/stats.hpp"

using namespace slds;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int k, bool pass, const std::string& detail, double seconds) {
  std::ostringstream os;
  os.precision(3);
  os << "criterion " << k << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << "  (" << seconds << " s)";
  std::cout << os.str() << std::endl;
  if (!pass) ++failures;
}

template <typename F>
void run(int k, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(k, pass, detail, s);
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

std::string fmt(double v) { return format_double(v); }

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double overlap_quadrature(double m1, double m2) {
  const double lo = std::min(m1, m2) - 12.0, hi = std::max(m1, m2) + 12.0;
  const int k = 200'000;
  const double h = (hi - lo) / k;
  double s = 0;
  for (int i = 0; i <= k; ++i) {
    const double z = lo + i * h;
    s += std::min(phi(z - m1), phi(z - m2)) * (i == 0 || i == k ? 1 : (i % 2 ? 4 : 2));
  }
  return s * h / 3.0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const std::size_t threads = default_threads();

  run(1, [](std::string& d) {
    const auto mb = build_case_study(1, 0.9, 2.0, 10.0);
    const auto c = certify(mb.cl, classify_regions(mb.model, 10.0), 10.0, 1);
    // independent evaluation of each constant
    const double g = 0.9 * 0.9, cc = 2.0 * 2.0, rho2 = 100.0;
    const double K = 1.0 + cc * rho2;
    const double r_hat = 2.0 * K / (g * (1.0 - g));
    const double s = std::sqrt(2.0 * (K + 1.0));
    const double K2 = 1.5 + 2.0 * cc + cc * cc * rho2;
    const bool ok = rel_close(c.gamma, g, 1e-9) && rel_close(c.c, cc, 1e-9) && rel_close(c.K, 401.0, 1e-9) &&
                    rel_close(c.r_hat, r_hat, 1e-9) && rel_close(c.s_radius, s, 1e-9) &&
                    rel_close(c.s_radius, 28.355, 1e-4) && rel_close(c.K2, 1609.5, 1e-9);
    d = "gamma=" + fmt(c.gamma) + " c=" + fmt(c.c) + " K=" + fmt(c.K) + " r_hat=" + fmt(c.r_hat) +
        " s=" + fmt(c.s_radius) + " K2=" + fmt(c.K2) +
        " [r_hat = 2K/(gamma(1-gamma)) = 802/0.1539; the quoted 5213.45 is off by 0.04%]";
    return ok;
  });

  run(2, [](std::string& d) {
    std::size_t total = 0, models = 0, bad = 0;
    for (Eigen::Index n : {1, 2, 5, 10, 50, 100, 200}) {
      for (double g : {0.5, 0.7, 0.9}) {
        const auto mb = build_case_study(n, g, 2.0, 10.0);
        const auto c = certify(mb.cl, classify_regions(mb.model, 10.0), 10.0, n);
        RandomStream rng(derive_seed(2, {static_cast<std::uint64_t>(n), seed_bits(g)}));
        MatrixXd pts(n, 10'000);
        for (Eigen::Index k = 0; k < pts.cols(); ++k) {
          VectorXd u = rng.normal_vector(n);
          pts.col(k) = (40.0 * rng.uniform()) * u / u.norm();
        }
        const auto rep = drift_check(mb.cl, mb.model, c, pts);
        total += rep.checked;
        bad += rep.violations.size() + (c.drift2_verified ? 0 : 1);
        ++models;
      }
    }
    d = std::to_string(models) + " models, " + std::to_string(total) + " states, " + std::to_string(bad) +
        " violations of either drift inequality";
    return bad == 0;
  });

  run(3, [](std::string& d) {
    const auto mb = build_case_study(2, 0.9, 2.0, 10.0);
    const auto set = operational_small_set(mb.cl, default_operational_radius(mb.cl));
    const auto scheme = SplitScheme::ball(set);
    VectorXd x(2);
    x << 0.3, -0.2;
    if (!scheme.in_set(x)) throw std::runtime_error("start point outside S");
    const int m = 100'000;
    RandomStream a(31), b(32);
    MatrixXd ys(2, m), zs(2, m);
    std::size_t regens = 0;
    for (int k = 0; k < m; ++k) {
      regens += split_step_into(mb.cl, mb.model, scheme, x, ys.col(k), a);
      step_into(mb.cl, mb.model, x, zs.col(k), b);
    }
    bool ok = true;
    std::string detail;
    for (int i = 0; i < 2; ++i) {
      const double mu = ys.row(i).mean(), mz = zs.row(i).mean();
      const double vu = (ys.row(i).array() - mu).square().sum() / (m - 1);
      const double vz = (zs.row(i).array() - mz).square().sum() / (m - 1);
      const double se = std::sqrt(vu / m + vz / m);
      ok = ok && std::abs(mu - mz) <= 4 * se;
      detail += " mean_" + std::to_string(i) + " " + fmt(mu) + " vs " + fmt(mz) + " (se " + fmt(se) + ")";
    }
    const VectorXd my = ys.rowwise().mean(), mz = zs.rowwise().mean();
    const VectorXd qy = (ys.colwise() - my).colwise().squaredNorm().transpose();
    const VectorXd qz = (zs.colwise() - mz).colwise().squaredNorm().transpose();
    const double ty = qy.mean(), tz = qz.mean();
    const double se = std::sqrt(((qy.array() - ty).square().sum() + (qz.array() - tz).square().sum()) /
                                (static_cast<double>(m) * (m - 1)));
    ok = ok && std::abs(ty - tz) <= 4 * se;
    d = "beta=" + fmt(scheme.beta()) + " regenerations=" + std::to_string(regens) + detail + " trace " + fmt(ty) +
        " vs " + fmt(tz) + " (se " + fmt(se) + ")";
    return ok;
  });

  run(4, [](std::string& d) {
    MatrixXd L(0, 1);
    const MatrixXd Z = MatrixXd::Zero(1, 1);
    SldsModeld model(1, 1, {Regiond::polyhedral(L, VectorXd(0), true)}, {{Z, Z}});
    const auto cl = ClosedLoopd::from_matrices({Z});
    const auto spec = RewardSpecd::from_effective(MatrixXd::Identity(1, 1));
    const auto scheme = SplitScheme::ball(operational_small_set(cl, default_operational_radius(cl)));
    RandomStream rng(4);
    const auto log = simulate_regenerative(cl, model, scheme, 1'000'000, rng);
    const auto est = estimate_all(log, spec, scheme);
    const double truth = std::sqrt(2.0 / std::numbers::pi);
    d = "estimate " + fmt(est.reward_timeavg) + " se " + fmt(est.standard_error) + " blocks " +
        std::to_string(est.block_count) + " truth " + fmt(truth);
    return std::isfinite(est.standard_error) && std::abs(est.reward_timeavg - truth) <= 4 * est.standard_error;
  });

  run(5, [](std::string& d) {
    RandomStream rng(5);
    std::size_t checked = 0;
    double worst = 0;
    while (checked < 1000) {
      const Eigen::Index L = 3 + static_cast<Eigen::Index>(rng.uniform() * 400);
      MatrixXd states(2, L);
      rng.fill_normal(states);
      std::vector<std::uint8_t> thetas(static_cast<std::size_t>(L - 1));
      const double p = 0.01 + 0.5 * rng.uniform();
      for (auto& t : thetas) t = rng.bernoulli(p);
      const Eigen::Index N = 1 + static_cast<Eigen::Index>(rng.uniform() * (L - 2));
      if (checked % 4 == 0) thetas[static_cast<std::size_t>(N - 1)] = 1;
      const auto log = RegenerationLog::from_chain(states, thetas, N);
      if (log.taus().empty() || !log.tau_r() || log.taus().front() > N) continue;
      const VectorXd r = states.colwise().norm().transpose();
      const double rho = r.head(N).mean() + rng.normal();
      const auto dec = decompose_sum(log, r, rho);
      double direct = 0;
      for (Eigen::Index i = 0; i < N; ++i) direct += r(i) - rho;
      const double err = std::abs(dec.O1 + dec.Z - dec.O2 - direct);
      worst = std::max(worst, err / static_cast<double>(N));
      if (err > 1e-9 * static_cast<double>(N)) {
        d = "identity broken at N=" + std::to_string(N);
        return false;
      }
      ++checked;
    }
    d = std::to_string(checked) + " fuzzed logs, max |O1+Z-O2-sum|/N = " + fmt(worst);
    return true;
  });

  run(6, [](std::string& d) {
    RandomStream rng(6);
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
      VectorXd a(1), b(1);
      a << 4 * rng.normal();
      b << 4 * rng.normal();
      worst = std::max(worst, std::abs(gaussian_overlap(a, b).alpha - overlap_quadrature(a(0), b(0))));
    }
    d = "100 pairs, max |alpha - quadrature| = " + fmt(worst);
    return worst <= 1e-6;
  });

  run(7, [threads](std::string& d) {
    const auto r = sweep_dimension(SweepConfig::desk_dimension(), threads);
    const FitRow* full = nullptr;
    const FitRow* upper = nullptr;
    for (const auto& f : r.fits) (f.range == "full" ? full : upper) = &f;
    std::string curve;
    for (const auto& row : r.rows) curve += " " + std::to_string(row.n) + ":" + fmt(std::round(row.N_avg * 10) / 10);
    const double r2 = full && full->r2 ? *full->r2 : NAN;
    d = "R2(full grid)=" + fmt(r2) + " R2(upper half)=" + fmt(upper && upper->r2 ? *upper->r2 : NAN) +
        " slope=" + fmt(full && full->slope ? *full->slope : NAN) + " N_avg by n:" + curve;
    return r2 >= 0.9;
  });

  run(8, [threads](std::string& d) {
    bool ok = true;
    for (std::uint64_t seed : {SweepConfig{}.master_seed, std::uint64_t{777}}) {
      auto cfg = SweepConfig::desk_gamma();
      cfg.master_seed = seed;
      const auto r = sweep_gamma(cfg, threads);
      d += " seed " + std::to_string(seed) + ":";
      for (const auto& s : r.spearman) {
        d += " n=" + std::to_string(s.n) + " spearman=" + (s.rho ? fmt(*s.rho) : std::string("undefined"));
        if (seed == SweepConfig{}.master_seed) ok = ok && s.rho && *s.rho >= 0.9;
      }
    }
    return ok;
  });

  run(9, [](std::string& d) {
    BoundConstants k;
    k.o3 = 0;
    const auto N = [&](double beta, double g, double eps, double delta, Eigen::Index n) {
      return required_samples_beta(beta, g, eps, delta, n, 0.0, k).n_real;
    };
    const double base = N(0.125, 0.75, 0.1, 0.1, 12);
    const double rn = N(0.125, 0.75, 0.1, 0.1, 24) / base;
    const double re = N(0.125, 0.75, 0.05, 0.1, 12) / base;
    const double rd = N(0.125, 0.75, 0.1, 0.05, 12) / base;
    const double rb = N(0.0625, 0.75, 0.1, 0.1, 12) / base;
    const double rg = N(0.125, 0.875, 0.1, 0.1, 12) / base;
    const double rd4 = N(0.125, 0.75, 0.1, 0.025, 12) / base;
    d = "n x2 -> " + fmt(rn) + ", eps /2 -> " + fmt(re) + ", delta /2 -> " + fmt(rd) + ", delta /4 -> " + fmt(rd4) +
        ", beta /2 -> " + fmt(rb) + ", (1-gamma) /2 -> " + fmt(rg);
    return rn == 2.0 && re == 4.0 && rd == 2.0 && rd4 == 4.0 && rb == 2.0 && rg == 2.0;
  });

  run(10, [threads](std::string& d) {
    const auto mb = build_case_study(1, 0.9, 2.0, 10.0);
    const auto cert = certify(mb.cl, classify_regions(mb.model, 10.0), 10.0, 1);
    const auto set = operational_small_set(mb.cl, default_operational_radius(mb.cl));
    const BoundConstants consts;
    const auto req = required_samples(cert, 0.5, 0.2, 1, 0.0, consts, set.log_beta);
    const auto N = static_cast<Eigen::Index>(req.operational->n_required);
    const VectorXd x0 = VectorXd::Zero(1);
    const auto ref = reference_reward(mb.cl, mb.model, mb.spec, x0, 100'000'000, 1001);
    const auto v = validate_bound(mb.cl, mb.model, mb.spec, N, 0.5, 0.2, 200, ref.mean, x0, 1002, threads);
    d = "N=" + std::to_string(N) + " (log beta_op=" + fmt(set.log_beta) + ") rho_star=" + fmt(ref.mean) + " (se " +
        fmt(ref.standard_error) + ") failures " + std::to_string(v.failures) + "/200 rate " + fmt(v.failure_rate) +
        " threshold " + fmt(v.threshold);
    return v.passed && v.failure_rate <= 0.2 + 2 * std::sqrt(0.2 * 0.8 / 200);
  });

  run(11, [threads](std::string& d) {
    const std::string cfg = std::string(SLDS_SOURCE_DIR) + "/configs/desk_pipeline.json";
    const fs::path base = fs::temp_directory_path() / "slds_acceptance_golden";
    fs::remove_all(base);
    const auto s1 = run_pipeline(cfg, (base / "run1").string(), threads);
    const auto s2 = run_pipeline(cfg, (base / "run2").string(), threads);
    std::size_t same = 0;
    for (const auto& f : s1.files) same += slurp(base / "run1" / f) == slurp(base / "run2" / f) ? 1 : 0;
    d = std::to_string(same) + "/" + std::to_string(s1.files.size()) + " output files byte-identical";
    const bool ok = s1.files == s2.files && same == s1.files.size() && !s1.files.empty();
    fs::remove_all(base);
    return ok;
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
