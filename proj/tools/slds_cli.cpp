// slds: command-line front end for simulation, certification, regenerative
// estimation, bound evaluation and the case-study sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "slds/bench.hpp"
#include "slds/bounds.hpp"
#include "slds/config.hpp"
#include "slds/ergodicity.hpp"
#include "slds/format.hpp"
#include "slds/parallel.hpp"
#include "slds/regen.hpp"
#include "slds/simulate.hpp"

namespace fs = std::filesystem;
using namespace slds;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 20240601;
  std::string out;
  std::size_t threads = 0;
  bool paper_scale = false;
  bool seed_given = false;
};

std::string out_dir(const Globals& g) {
  std::string dir = g.out;
  if (dir.empty()) {
    if (const char* env = std::getenv("SLDS_OUT_DIR")) dir = env;
  }
  if (dir.empty()) dir = ".";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string out_path(const Globals& g, const std::string& name) {
  return (fs::path(out_dir(g)) / name).string();
}

ModelBundle model_for(const Globals& g, const std::string& model_path) {
  const std::string path = !model_path.empty() ? model_path : g.config;
  if (path.empty()) throw ConfigParse("no model given: pass --model PATH or --config PATH");
  return load_model(path);
}

VectorXd x0_from(const std::vector<double>& v, Eigen::Index n) {
  if (v.empty()) return VectorXd::Zero(n);
  if (static_cast<Eigen::Index>(v.size()) != n) {
    throw DimensionMismatch("--x0 has " + std::to_string(v.size()) + " entries, model has n=" + std::to_string(n));
  }
  return Eigen::Map<const VectorXd>(v.data(), n);
}

Certificate certify_bundle(const ModelBundle& mb, std::optional<double> lambda = {}) {
  const auto cls = classify_regions(mb.model, mb.rho_ball);
  return certify(mb.cl, cls, mb.rho_ball, mb.model.n(), lambda);
}

SmallSet op_set(const ModelBundle& mb, std::optional<double> radius, const std::vector<double>& center) {
  const VectorXd m = x0_from(center, mb.model.n());
  const double r = radius.value_or(default_operational_radius(mb.cl, mb.model, m));
  return operational_small_set(mb.cl, mb.model, r, m);
}

SweepConfig sweep_config(const Globals& g, bool dimension, std::optional<std::size_t> trials,
                         std::optional<double> eps_stop) {
  SweepConfig c = g.paper_scale ? (dimension ? SweepConfig::paper_dimension() : SweepConfig::paper_gamma())
                                : (dimension ? SweepConfig::desk_dimension() : SweepConfig::desk_gamma());
  c.master_seed = g.seed;
  if (!g.config.empty()) {
    const Json j = load_json_file(g.config);
    const char* key = dimension ? "dimension_sweep" : "gamma_sweep";
    c = sweep_from_json(j.contains(key) ? j.at(key) : j, c);
  }
  if (g.seed_given) c.master_seed = g.seed;
  if (trials) c.trials = *trials;
  if (eps_stop) c.eps_stop = *eps_stop;
  return c;
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text_file(path, ss.str());
  std::cout << "wrote " << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switched linear system ergodicity, regeneration and sample-complexity toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON config (model or sweep/pipeline, depending on the subcommand)");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory (default $SLDS_OUT_DIR or .)");
  app.add_option("--threads", g.threads, "worker threads (0: all cores)");
  app.add_flag("--paper-scale", g.paper_scale, "use the full-scale sweep parameters");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate one closed-loop trajectory");
  std::string sim_model;
  Eigen::Index sim_steps = 1000;
  std::vector<double> sim_x0;
  bool sim_zero_noise = false;
  sim->add_option("--model", sim_model, "model JSON");
  sim->add_option("--steps", sim_steps, "horizon N (states x_0..x_{N-1})")->check(CLI::PositiveNumber);
  sim->add_option("--x0", sim_x0, "initial state (default 0)");
  sim->add_flag("--zero-noise", sim_zero_noise, "debug: drop the noise term");

  // certify
  auto* cer = app.add_subcommand("certify", "compute and check the ergodicity certificate");
  std::string cer_model;
  std::optional<double> cer_lambda;
  std::optional<double> cer_rho;
  std::size_t cer_samples = 10'000;
  std::size_t cer_pairs = 10'000;
  cer->add_option("--model", cer_model, "model JSON");
  cer->add_option("--lambda", cer_lambda, "drift rate in (gamma, 1)");
  cer->add_option("--rho", cer_rho, "override the model's ball radius");
  cer->add_option("--samples", cer_samples, "states for the drift check");
  cer->add_option("--pairs", cer_pairs, "pairs for the overlap check");

  // estimate
  auto* est = app.add_subcommand("estimate", "regenerative estimate of the steady-state reward");
  std::string est_model;
  Eigen::Index est_N = 1'000'000;
  std::string est_beta_mode = "operational";
  std::optional<double> est_radius;
  std::optional<double> est_beta;
  std::string est_x0_mode = "nu_hat";
  std::vector<double> est_x0;
  est->add_option("--model", est_model, "model JSON");
  est->add_option("--N", est_N, "horizon")->check(CLI::Range(Eigen::Index{2}, Eigen::Index{1'000'000'000}));
  est->add_option("--beta-mode", est_beta_mode, "paper | operational | iid-debug")
      ->check(CLI::IsMember({"paper", "operational", "iid-debug"}));
  std::vector<double> est_center;
  est->add_option("--radius", est_radius, "operational small-set radius");
  est->add_option("--center", est_center, "operational small-set center (default 0)");
  est->add_option("--beta", est_beta, "operational beta (default: the bound for the radius)");
  est->add_option("--x0-mode", est_x0_mode, "nu_hat | given")->check(CLI::IsMember({"nu_hat", "given"}));
  est->add_option("--x0", est_x0, "initial state for --x0-mode given");

  // bound
  auto* bnd = app.add_subcommand("bound", "evaluate the sample-size bound and its terms");
  std::string bnd_model, bnd_cert, bnd_consts;
  double bnd_eps = 0.1, bnd_delta = 0.1, bnd_x0 = 0.0;
  std::optional<Eigen::Index> bnd_n;
  std::optional<double> bnd_N;
  std::optional<double> bnd_radius;
  bnd->add_option("--model", bnd_model, "model JSON (certified on the fly)");
  bnd->add_option("--certificate", bnd_cert, "certificate JSON from `certify`");
  bnd->add_option("--eps", bnd_eps, "accuracy");
  bnd->add_option("--delta", bnd_delta, "failure probability");
  bnd->add_option("--n", bnd_n, "dimension (default: the certificate's)");
  bnd->add_option("--x0-norm", bnd_x0, "|x0|");
  bnd->add_option("--constants", bnd_consts, "JSON with c_10as, c_1_sq, c_2as0, c_2as20, o1, o2, o3, leading_C");
  bnd->add_option("--N", bnd_N, "horizon for the term report (default: operational requirement)");
  std::vector<double> bnd_center;
  bnd->add_option("--radius", bnd_radius, "operational small-set radius (needs --model)");
  bnd->add_option("--center", bnd_center, "operational small-set center");

  // validate-bound
  auto* val = app.add_subcommand("validate-bound", "empirical failure rate at the required N");
  std::string val_model, val_consts;
  double val_eps = 0.5, val_delta = 0.2, val_x0 = 0.0;
  std::size_t val_trials = 200, val_ref_steps = 100'000'000;
  std::optional<double> val_radius;
  std::optional<double> val_rho_star;
  val->add_option("--model", val_model, "model JSON");
  val->add_option("--eps", val_eps, "accuracy");
  val->add_option("--delta", val_delta, "failure probability");
  val->add_option("--trials", val_trials, "independent trajectories");
  val->add_option("--reference-steps", val_ref_steps, "length of the reference run");
  val->add_option("--rho-star", val_rho_star, "reference value (skips the reference run)");
  val->add_option("--x0-norm", val_x0, "|x0|, placed on e_1");
  val->add_option("--constants", val_consts, "bound constants JSON");
  std::vector<double> val_center;
  val->add_option("--radius", val_radius, "operational small-set radius");
  val->add_option("--center", val_center, "operational small-set center");

  // sweeps
  auto* sdim = app.add_subcommand("sweep-dim", "pseudo-sample complexity against dimension");
  auto* sgam = app.add_subcommand("sweep-gamma", "pseudo-sample complexity against gamma");
  std::optional<std::size_t> sw_trials;
  std::optional<double> sw_eps;
  for (auto* s : {sdim, sgam}) {
    s->add_option("--trials", sw_trials, "trials per cell");
    s->add_option("--eps-stop", sw_eps, "stopping tolerance");
  }

  auto* run = app.add_subcommand("run", "full pipeline from a config file");

  CLI11_PARSE(app, argc, argv);
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*sim) {
      const auto mb = model_for(g, sim_model);
      RandomStream rng(g.seed);
      SimulationOptions opts;
      opts.zero_noise = sim_zero_noise;
      const auto traj = simulate(mb.cl, mb.model, mb.spec, x0_from(sim_x0, mb.model.n()), sim_steps, rng, opts);
      write_file(out_path(g, "trajectory.csv"), [&](std::ostream& os) { write_trajectory_csv(os, traj); });
      std::cout << "mean reward " << format_double(traj.rewards.mean()) << '\n';
    } else if (*cer) {
      auto mb = model_for(g, cer_model);
      if (cer_rho) mb.rho_ball = *cer_rho;
      const auto cert = certify_bundle(mb, cer_lambda);
      RandomStream rng(g.seed);
      MatrixXd samples(mb.model.n(), static_cast<Eigen::Index>(cer_samples));
      rng.fill_normal(samples);
      samples *= 2.0 * mb.rho_ball;
      const auto drift = drift_check(mb.cl, mb.model, cert, samples);
      const auto overlap = overlap_positivity_check(mb.cl, mb.model, cert, cer_pairs, rng);
      write_file(out_path(g, "certificate.txt"),
                 [&](std::ostream& os) { write_certificate_report(os, cert, &drift, &overlap); });
      write_file(out_path(g, "certificate.json"),
                 [&](std::ostream& os) { os << certificate_to_json(cert).dump(2) << '\n'; });
      write_certificate_report(std::cout, cert, &drift, &overlap);
      if (!drift.ok() || !overlap.ok()) return 5;
    } else if (*est) {
      const auto mb = model_for(g, est_model);
      const auto n = mb.model.n();
      RandomStream rng(g.seed);
      std::optional<SplitScheme> scheme;
      if (est_beta_mode == "iid-debug") {
        scheme = SplitScheme::iid_debug(mb.cl);
      } else if (est_beta_mode == "paper") {
        scheme = SplitScheme::ball(certify_bundle(mb).small_set(), est_beta);
      } else {
        scheme = SplitScheme::ball(op_set(mb, est_radius, est_center), est_beta);
      }
      RegenOptions ro;
      if (est_x0_mode == "given") {
        ro.start = RegenOptions::Start::Given;
        ro.x0 = x0_from(est_x0, n);
      }
      const auto log = simulate_regenerative(mb.cl, mb.model, *scheme, est_N, rng, ro);
      const auto out = estimate_all(log, mb.spec, *scheme);
      write_file(out_path(g, "blocks.csv"), [&](std::ostream& os) { write_blocks_csv(os, log, mb.spec); });
      write_file(out_path(g, "estimate_summary.csv"), [&](std::ostream& os) {
        os << "reward_timeavg,sigma2_as,standard_error,block_count,regenerations,beta_op,radius\n"
           << format_double(out.reward_timeavg) << ',' << format_double(out.sigma2_as) << ','
           << format_double(out.standard_error) << ',' << out.block_count << ',' << log.taus().size()
           << ',' << format_double(scheme->beta()) << ',' << format_double(scheme->set().radius) << '\n';
      });
      std::cout << "reward_timeavg " << format_double(out.reward_timeavg) << "\nsigma2_as "
                << format_double(out.sigma2_as) << "\nstandard_error " << format_double(out.standard_error)
                << "\nblock_count " << out.block_count << '\n';
      for (const auto& [label, v] : out.ratio_estimates) std::cout << "nu_pi(" << label << ") " << format_double(v) << '\n';
      for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*bnd) {
      std::optional<ModelBundle> mb;
      Certificate cert;
      if (!bnd_cert.empty()) {
        cert = certificate_from_json(load_json_file(bnd_cert));
      } else {
        mb = model_for(g, bnd_model);
        cert = certify_bundle(*mb);
      }
      const BoundConstants consts = bnd_consts.empty() ? BoundConstants{} : constants_from_json(load_json_file(bnd_consts));
      const Eigen::Index n = bnd_n.value_or(cert.n);
      std::optional<double> log_beta_op;
      if (mb) {
        log_beta_op = op_set(*mb, bnd_radius, bnd_center).log_beta;
      }
      const double x2 = bnd_x0 * bnd_x0;
      const auto req = required_samples(cert, bnd_eps, bnd_delta, n, x2, consts, log_beta_op);
      const double N = bnd_N.value_or(req.operational ? req.operational->n_required
                                                      : std::min(req.paper.n_required, 1e300));
      const auto paper = bound_terms(cert, n, N, x2, consts, cert.log_beta, bnd_eps, bnd_delta);
      std::ostringstream csv;
      write_bound_csv_header(csv);
      std::cout << "# constants are conventions (default 1), not derived values\n"
                << "[paper beta]\n";
      write_bound_report(std::cout, paper);
      write_bound_csv_row(csv, paper);
      if (log_beta_op) {
        const auto op = bound_terms(cert, n, N, x2, consts, *log_beta_op, bnd_eps, bnd_delta);
        std::cout << "[operational beta]\n";
        write_bound_report(std::cout, op);
        write_bound_csv_row(csv, op);
      }
      write_text_file(out_path(g, "bound.csv"), csv.str());
      std::cout << "wrote " << out_path(g, "bound.csv") << '\n';
    } else if (*val) {
      const auto mb = model_for(g, val_model);
      const auto cert = certify_bundle(mb);
      const BoundConstants consts = val_consts.empty() ? BoundConstants{} : constants_from_json(load_json_file(val_consts));
      const double log_beta_op = op_set(mb, val_radius, val_center).log_beta;
      VectorXd x0 = VectorXd::Zero(mb.model.n());
      x0(0) = val_x0;
      const auto req = required_samples_at(log_beta_op, cert.gamma, val_eps, val_delta, mb.model.n(),
                                           val_x0 * val_x0, consts);
      double rho_star = 0;
      if (val_rho_star) {
        rho_star = *val_rho_star;
      } else {
        const auto ref = reference_reward(mb.cl, mb.model, mb.spec, x0, val_ref_steps,
                                          derive_seed(g.seed, {0xfeedULL}));
        rho_star = ref.mean;
        std::cout << "rho_star " << format_double(ref.mean) << " +- " << format_double(ref.standard_error) << '\n';
      }
      const auto res = validate_bound(mb.cl, mb.model, mb.spec, static_cast<Eigen::Index>(req.n_required),
                                      val_eps, val_delta, val_trials, rho_star, x0, g.seed,
                                      g.threads ? g.threads : default_threads());
      std::cout << "N " << format_double(res.N) << "\nfailures " << res.failures << '/' << res.trials
                << "\nfailure_rate " << format_double(res.failure_rate) << "\nthreshold "
                << format_double(res.threshold) << '\n'
                << (res.passed ? "PASS" : "FAIL") << '\n';
      if (!res.passed) return 6;
    } else if (*sdim || *sgam) {
      const bool dim = static_cast<bool>(*sdim);
      const auto cfg = sweep_config(g, dim, sw_trials, sw_eps);
      const std::size_t threads = g.threads ? g.threads : default_threads();
      const auto r = dim ? sweep_dimension(cfg, threads) : sweep_gamma(cfg, threads);
      const std::string prefix = dim ? "dimension_" : "gamma_";
      write_file(out_path(g, prefix + "raw.csv"), [&](std::ostream& os) { write_raw_csv(os, r); });
      write_file(out_path(g, prefix + "aggregate.csv"), [&](std::ostream& os) { write_aggregate_csv(os, r); });
      write_file(out_path(g, prefix + "plot.dat"), [&](std::ostream& os) { write_plot_data(os, r, dim); });
      if (dim) {
        write_file(out_path(g, prefix + "fit.csv"), [&](std::ostream& os) { write_fit_csv(os, r); });
        write_fit_csv(std::cout, r);
      } else {
        write_file(out_path(g, prefix + "spearman.csv"), [&](std::ostream& os) { write_spearman_csv(os, r); });
        write_spearman_csv(std::cout, r);
      }
      for (const auto& row : r.rows) {
        std::cerr << "n=" << row.n << " gamma_root=" << format_double(row.gamma)
                  << " mean runtime " << std::setprecision(3) << row.mean_runtime_s << " s\n";
      }
    } else if (*run) {
      if (g.config.empty()) throw ConfigParse("run needs --config PATH");
      std::optional<std::size_t> threads;
      if (g.threads) threads = g.threads;
      const auto summary = run_pipeline(g.config, out_dir(g), threads, g.seed_given ? std::optional(g.seed) : std::nullopt);
      for (const auto& f : summary.files) std::cout << "wrote " << f << '\n';
    }
  } catch (const ConfigParse& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CertificationFailed& e) {
    std::cerr << "certification failed: " << e.what() << '\n';
    return 3;
  } catch (const NotCertifiable& e) {
    std::cerr << "certification failed: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
