#include "slds/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include "slds/config.hpp"
#include "slds/ergodicity.hpp"
#include "slds/format.hpp"
#include "slds/parallel.hpp"
#include "slds/simulate.hpp"
#include "slds/stats.hpp"

namespace slds {

ModelBundle build_case_study(Eigen::Index n, double gamma_root, double c_root, double rho_ball) {
  if (n < 1) throw InvalidArgument("case study: n must be positive");
  if (!(gamma_root >= 0) || !std::isfinite(gamma_root)) {
    throw InvalidArgument("case study: gamma_root must be finite and nonnegative");
  }
  if (!(c_root >= 0) || !std::isfinite(c_root)) throw InvalidArgument("case study: c_root must be >= 0");
  if (!(rho_ball > 0)) throw InvalidArgument("case study: rho must be positive");
  const MatrixXd I = MatrixXd::Identity(n, n);
  std::vector<Regiond> regions{Regiond::radial_shell(rho_ball, std::numeric_limits<double>::infinity()),
                               Regiond::radial_shell(0.0, rho_ball)};
  std::vector<Dynamics<double>> dyn{{gamma_root * I, MatrixXd::Zero(n, 1)},
                                    {c_root * I, MatrixXd::Zero(n, 1)}};
  SldsModeld model(n, 1, std::move(regions), std::move(dyn));
  Policyd policy{MatrixXd::Zero(1, n)};
  RewardSpecd spec(I, MatrixXd::Identity(1, 1), policy, true);
  ClosedLoopd cl = closed_loop(model, policy);
  return ModelBundle{std::move(model), std::move(policy), std::move(spec), std::move(cl), rho_ball};
}

PseudoResult pseudo_sample_complexity(const ClosedLoopd& cl, const SldsModeld& model,
                                      const RewardSpecd& spec, double eps_stop, RandomStream& rng,
                                      std::size_t max_steps, const VectorXd& x0) {
  if (!(eps_stop > 0)) throw InvalidArgument("eps_stop must be positive");
  if (max_steps < 1) throw InvalidArgument("max_steps must be at least 1");
  VectorXd a = x0;
  VectorXd b(x0.size());
  double S = reward(a, spec);  // S_N with N = 1
  for (std::size_t N = 1;; ++N) {
    step_into(cl, model, a, b, rng);
    a.swap(b);
    check_divergence(a, N, 1e150);
    const double r = reward(a, spec);  // r(x_N)
    const double dN = static_cast<double>(N);
    if (std::abs(S / dN - r) / (dN + 1.0) < eps_stop) return {N, false};
    if (N >= max_steps) return {N, true};
    S += r;
  }
}

void SweepConfig::validate() const {
  if (dims.empty() || gammas.empty()) throw InvalidArgument("sweep needs at least one n and one gamma");
  for (auto n : dims) {
    if (n < 1) throw InvalidArgument("sweep dimensions must be positive");
  }
  for (double g : gammas) {
    if (!(g > 0 && g < 1)) throw InvalidArgument("sweep gamma_root " + format_double(g) + " not in (0, 1)");
  }
  if (!(c >= 0)) throw InvalidArgument("sweep c_root must be >= 0");
  if (!(rho_ball > 0)) throw InvalidArgument("sweep rho must be positive");
  if (!(eps_stop > 0)) throw InvalidArgument("sweep eps_stop must be positive");
  if (trials < 1) throw InvalidArgument("sweep needs at least one trial");
  if (max_steps < 1) throw InvalidArgument("sweep max_steps must be positive");
}

namespace {

std::vector<double> decimal_grid(double start, double stop, double step) {
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(std::round((start + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return out;
}

std::vector<Eigen::Index> int_grid(Eigen::Index start, Eigen::Index stop, Eigen::Index step) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index n = start; n <= stop; n += step) out.push_back(n);
  return out;
}

}  // namespace

SweepConfig SweepConfig::desk_dimension() {
  SweepConfig c;
  c.dims = int_grid(25, 200, 25);
  c.gammas = {0.9};
  return c;
}

SweepConfig SweepConfig::desk_gamma() {
  SweepConfig c;
  c.dims = {10, 50};
  c.gammas = decimal_grid(0.5, 0.9, 0.05);
  return c;
}

SweepConfig SweepConfig::paper_dimension() {
  SweepConfig c;
  c.dims = int_grid(1, 2000, 50);
  c.gammas = {0.9};
  c.eps_stop = 1e-10;
  c.trials = 100'000;
  c.max_steps = 1'000'000'000;
  return c;
}

SweepConfig SweepConfig::paper_gamma() {
  SweepConfig c = paper_dimension();
  c.gammas = decimal_grid(0.5, 0.9, 0.05);
  c.trials = 10'000;
  return c;
}

std::uint64_t cell_seed(std::uint64_t master, Eigen::Index n, double gamma_root, std::size_t trial) {
  return derive_seed(master, {static_cast<std::uint64_t>(n), seed_bits(gamma_root),
                              static_cast<std::uint64_t>(trial)});
}

AggregateRow aggregate(const std::vector<TrialRow>& trials, std::size_t max_steps) {
  AggregateRow row;
  if (trials.empty()) return row;
  row.n = trials.front().n;
  row.gamma = trials.front().gamma;
  row.trials = trials.size();
  std::size_t censored = 0;
  for (const auto& t : trials) censored += t.censored ? 1 : 0;
  row.censored_frac = static_cast<double>(censored) / static_cast<double>(trials.size());
  const bool drop = row.censored_frac < 0.05;
  std::vector<double> values;
  values.reserve(trials.size());
  for (const auto& t : trials) {
    if (t.censored && drop) continue;
    values.push_back(static_cast<double>(t.censored ? max_steps : t.N));
  }
  const auto ms = mean_stderr(values);
  row.N_avg = ms.mean;
  row.stderr_ = ms.stderr_;
  return row;
}

SweepResult run_grid(const SweepConfig& config, std::size_t threads) {
  config.validate();
  if (threads == 0) threads = default_threads();
  struct Cell {
    std::size_t bundle;
    std::size_t trial;
  };
  std::vector<ModelBundle> bundles;
  std::vector<std::pair<double, Eigen::Index>> keys;
  for (double g : config.gammas) {
    for (auto n : config.dims) {
      bundles.push_back(build_case_study(n, g, config.c, config.rho_ball));
      keys.emplace_back(g, n);
    }
  }
  std::vector<Cell> cells;
  cells.reserve(bundles.size() * config.trials);
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    for (std::size_t t = 0; t < config.trials; ++t) cells.push_back({b, t});
  }

  SweepResult result;
  result.raw.resize(cells.size());
  std::vector<double> seconds(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const auto [b, trial] = cells[i];
    const auto& mb = bundles[b];
    const auto [g, n] = keys[b];
    const std::uint64_t seed = cell_seed(config.master_seed, n, g, trial);
    RandomStream rng(seed);
    VectorXd x0 = VectorXd::Zero(n);
    x0(0) = config.x0_norm;
    const auto start = std::chrono::steady_clock::now();
    const auto pr = pseudo_sample_complexity(mb.cl, mb.model, mb.spec, config.eps_stop, rng,
                                             config.max_steps, x0);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.raw[i] = TrialRow{n, g, trial, pr.N, pr.censored, seed};
  });

  for (std::size_t b = 0; b < bundles.size(); ++b) {
    const auto first = result.raw.begin() + static_cast<std::ptrdiff_t>(b * config.trials);
    std::vector<TrialRow> slice(first, first + static_cast<std::ptrdiff_t>(config.trials));
    AggregateRow row = aggregate(slice, config.max_steps);
    double total = 0;
    for (std::size_t t = 0; t < config.trials; ++t) total += seconds[b * config.trials + t];
    row.mean_runtime_s = total / static_cast<double>(config.trials);
    result.rows.push_back(row);
  }
  return result;
}

SweepResult sweep_dimension(const SweepConfig& config, std::size_t threads) {
  SweepResult r = run_grid(config, threads);
  if (config.dims.size() < 2) return r;
  for (double g : config.gammas) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : r.rows) {
      if (row.gamma == g) pts.emplace_back(static_cast<double>(row.n), row.N_avg);
    }
    std::sort(pts.begin(), pts.end());
    const std::size_t half = pts.size() / 2;  // upper half: the last ceil(k/2) points
    for (const char* range : {"upper_half", "full"}) {
      const std::size_t from = std::string(range) == "full" ? 0 : half;
      std::vector<double> x, y;
      for (std::size_t k = from; k < pts.size(); ++k) {
        x.push_back(pts[k].first);
        y.push_back(pts[k].second);
      }
      FitRow f;
      f.gamma = g;
      f.range = range;
      f.points = x.size();
      if (auto fit = linear_fit(x, y)) {
        f.slope = fit->slope;
        f.intercept = fit->intercept;
        f.r2 = fit->r2;
      }
      r.fits.push_back(f);
    }
  }
  return r;
}

SweepResult sweep_gamma(const SweepConfig& config, std::size_t threads) {
  SweepResult r = run_grid(config, threads);
  for (auto n : config.dims) {
    std::vector<double> g, v;
    for (const auto& row : r.rows) {
      if (row.n == n) {
        g.push_back(row.gamma);
        v.push_back(row.N_avg);
      }
    }
    r.spearman.push_back(SpearmanRow{n, g.size(), spearman(g, v)});
  }
  return r;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

}  // namespace

void write_raw_csv(std::ostream& os, const SweepResult& r) {
  os << "n,gamma,trial,N_pseudo,censored,seed\n";
  for (const auto& t : r.raw) {
    os << t.n << ',' << format_double(t.gamma) << ',' << t.trial << ',' << t.N << ','
       << (t.censored ? 1 : 0) << ',' << t.seed << '\n';
  }
}

void write_aggregate_csv(std::ostream& os, const SweepResult& r) {
  os << "n,gamma,trials,N_avg,stderr,censored_frac\n";
  for (const auto& a : r.rows) {
    os << a.n << ',' << format_double(a.gamma) << ',' << a.trials << ',' << format_double(a.N_avg)
       << ',' << format_double(a.stderr_) << ',' << format_double(a.censored_frac) << '\n';
  }
}

void write_fit_csv(std::ostream& os, const SweepResult& r) {
  os << "gamma,range,points,slope,intercept,r2\n";
  for (const auto& f : r.fits) {
    os << format_double(f.gamma) << ',' << f.range << ',' << f.points << ',' << opt(f.slope) << ','
       << opt(f.intercept) << ',' << opt(f.r2) << '\n';
  }
}

void write_spearman_csv(std::ostream& os, const SweepResult& r) {
  os << "n,points,spearman\n";
  for (const auto& s : r.spearman) os << s.n << ',' << s.points << ',' << opt(s.rho) << '\n';
}

void write_plot_data(std::ostream& os, const SweepResult& r, bool by_dimension) {
  // one block per series, blocks separated by a blank line
  std::map<double, std::vector<std::pair<double, double>>> series;
  for (const auto& a : r.rows) {
    if (by_dimension) {
      series[a.gamma].emplace_back(static_cast<double>(a.n), a.N_avg);
    } else {
      series[static_cast<double>(a.n)].emplace_back(a.gamma, a.N_avg);
    }
  }
  bool first = true;
  for (auto& [key, pts] : series) {
    std::sort(pts.begin(), pts.end());
    if (!first) os << "\n\n";
    first = false;
    os << (by_dimension ? "# gamma_root=" : "# n=") << format_double(key) << '\n';
    for (const auto& [x, y] : pts) os << format_double(x) << ' ' << format_double(y) << '\n';
  }
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string to_string_of(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

void certify_grid(const SweepConfig& c, std::ostream& csv) {
  for (double g : c.gammas) {
    for (auto n : c.dims) {
      const auto mb = build_case_study(n, g, c.c, c.rho_ball);
      try {
        const auto cls = classify_regions(mb.model, mb.rho_ball);
        const auto cert = certify(mb.cl, cls, mb.rho_ball, n);
        csv << n << ',' << format_double(g) << ',' << format_double(cert.gamma) << ','
            << format_double(cert.c) << ',' << format_double(cert.K) << ','
            << format_double(cert.r_hat) << ',' << format_double(cert.s_radius) << ','
            << format_double(cert.lambda) << ',' << format_double(cert.K2) << ','
            << format_double(cert.log_beta) << ',' << (cert.drift2_verified ? 1 : 0) << '\n';
      } catch (const NotCertifiable& e) {
        throw CertificationFailed("case study n=" + std::to_string(n) + ", gamma_root=" +
                                  format_double(g) + ": " + e.what());
      }
    }
  }
}

}  // namespace

PipelineSummary run_pipeline(const std::string& config_path, const std::string& out_dir_arg,
                             std::optional<std::size_t> threads,
                             std::optional<std::uint64_t> seed_override) {
  const std::string text = read_text_file(config_path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigParse("'" + config_path + "' is not valid JSON: " + e.what());
  }
  PipelineConfig cfg = pipeline_from_json(j);
  if (seed_override) {
    cfg.master_seed = *seed_override;
    if (cfg.dimension) cfg.dimension->master_seed = *seed_override;
    if (cfg.gamma) cfg.gamma->master_seed = *seed_override;
  }
  const std::size_t nthreads = threads ? *threads : (cfg.threads ? cfg.threads : default_threads());
  const std::string out_dir = !out_dir_arg.empty() ? out_dir_arg
                              : !cfg.out_dir.empty() ? cfg.out_dir
                                                     : std::string(".");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

  // Certify every model on the grid before any simulation.
  std::ostringstream certs;
  certs << "n,gamma_root,gamma,c,K,r_hat,s_radius,lambda,K2,log_beta,drift2_verified\n";
  if (cfg.dimension) certify_grid(*cfg.dimension, certs);
  if (cfg.gamma) certify_grid(*cfg.gamma, certs);

  PipelineSummary summary;
  const auto put = [&](const std::string& name, const std::string& body) {
    const auto path = (std::filesystem::path(out_dir) / name).string();
    write_text_file(path, body);
    summary.files.push_back(name);
  };
  put("certificates.csv", certs.str());

  if (cfg.dimension) {
    summary.dimension = sweep_dimension(*cfg.dimension, nthreads);
    const auto& r = summary.dimension;
    put("dimension_raw.csv", to_string_of([&](std::ostream& os) { write_raw_csv(os, r); }));
    put("dimension_aggregate.csv", to_string_of([&](std::ostream& os) { write_aggregate_csv(os, r); }));
    put("dimension_fit.csv", to_string_of([&](std::ostream& os) { write_fit_csv(os, r); }));
    put("dimension_plot.dat", to_string_of([&](std::ostream& os) { write_plot_data(os, r, true); }));
  }
  if (cfg.gamma) {
    summary.gamma = sweep_gamma(*cfg.gamma, nthreads);
    const auto& r = summary.gamma;
    put("gamma_raw.csv", to_string_of([&](std::ostream& os) { write_raw_csv(os, r); }));
    put("gamma_aggregate.csv", to_string_of([&](std::ostream& os) { write_aggregate_csv(os, r); }));
    put("gamma_spearman.csv", to_string_of([&](std::ostream& os) { write_spearman_csv(os, r); }));
    put("gamma_plot.dat", to_string_of([&](std::ostream& os) { write_plot_data(os, r, false); }));
  }

  Json manifest;
  manifest["version"] = kVersion;
  manifest["csv_schema"] = kCsvSchemaVersion;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  manifest["config_hash_fnv1a"] = hash;
  manifest["master_seed"] = cfg.master_seed;
  manifest["x0"] = "x0_norm * e_1";
  manifest["stopping_rule"] = "first N >= 1 with |S_N/N - S_{N+1}/(N+1)| < eps_stop, S_N over x_0..x_{N-1}";
  manifest["seed_derivation"] = "splitmix64(master, n, bits(gamma_root), trial)";
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  if (cfg.dimension) manifest["dimension_sweep"] = sweep_to_json(*cfg.dimension);
  if (cfg.gamma) manifest["gamma_sweep"] = sweep_to_json(*cfg.gamma);
  manifest["files"] = summary.files;
  put("manifest.json", manifest.dump(2) + "\n");
  return summary;
}

}  // namespace slds
