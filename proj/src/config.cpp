#include "slds/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "slds/errors.hpp"

namespace slds {

namespace {

MatrixXd matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigParse(std::string(what) + ": expected a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigParse(std::string(what) + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

VectorXd vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigParse(std::string(what) + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json matrix_to_json(const MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

double radius_from_json(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigParse("radius: unrecognised value '" + s + "'");
  }
  return j.get<double>();
}

// Decimal grids: start + k step, rounded to 12 significant digits so that
// 0.5 + 7 * 0.05 prints and hashes as 0.85.
double tidy(double v) {
  if (v == 0.0) return v;
  const double scale = std::pow(10.0, 11 - std::floor(std::log10(std::abs(v))));
  return std::round(v * scale) / scale;
}

template <typename T>
std::vector<T> grid_from_json(const Json& j, const char* what) {
  std::vector<T> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<T>());
  } else if (j.is_object()) {
    const double start = j.at("start").get<double>();
    const double stop = j.at("stop").get<double>();
    const double step = j.at("step").get<double>();
    if (!(step > 0)) throw ConfigParse(std::string(what) + ": step must be positive");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k) {
      out.push_back(static_cast<T>(tidy(start + static_cast<double>(k) * step)));
    }
  } else {
    throw ConfigParse(std::string(what) + ": expected an array or {start, stop, step}");
  }
  return out;
}

template <typename Fn>
auto with_context(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ConfigParse(what + ": " + e.what());
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigParse("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json load_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigParse("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw IoError("write to '" + path + "' failed");
}

ModelBundle model_from_json(const Json& j) {
  return with_context("model", [&] {
    if (j.contains("case_study")) {
      const auto& cs = j.at("case_study");
      return build_case_study(cs.at("n").get<Eigen::Index>(), cs.value("gamma_root", 0.9),
                              cs.value("c_root", 2.0), cs.value("rho", 10.0));
    }
    const auto n = j.at("n").get<Eigen::Index>();
    const auto p = j.at("p").get<Eigen::Index>();
    std::vector<Regiond> regions;
    for (const auto& r : j.at("regions")) {
      const auto kind = r.at("kind").get<std::string>();
      if (kind == "radial_shell") {
        regions.push_back(Regiond::radial_shell(r.value("r_lo", 0.0),
                                                radius_from_json(r.contains("r_hi") ? r.at("r_hi") : Json())));
      } else if (kind == "polyhedral") {
        regions.push_back(Regiond::polyhedral(matrix_from_json(r.at("L"), "L"),
                                              vector_from_json(r.at("C"), "C"),
                                              r.at("declared_unbounded").get<bool>()));
      } else {
        throw ConfigParse("region kind '" + kind + "' is not radial_shell or polyhedral");
      }
    }
    const auto& As = j.at("A");
    const auto& Bs = j.at("B");
    if (As.size() != regions.size() || Bs.size() != regions.size()) {
      throw ConfigParse("model: need one A and one B per region");
    }
    std::vector<Dynamics<double>> dyn;
    for (std::size_t k = 0; k < regions.size(); ++k) {
      dyn.push_back({matrix_from_json(As[k], "A"), matrix_from_json(Bs[k], "B")});
    }
    SldsModeld model(n, p, std::move(regions), std::move(dyn));
    Policyd policy{j.contains("pi") ? matrix_from_json(j.at("pi"), "pi") : MatrixXd::Zero(p, n)};
    const MatrixXd Q = j.contains("Q") ? matrix_from_json(j.at("Q"), "Q") : MatrixXd::Identity(n, n);
    const MatrixXd R = j.contains("R") ? matrix_from_json(j.at("R"), "R") : MatrixXd::Identity(p, p);
    RewardSpecd spec(Q, R, policy, j.value("normalize_reward", false));
    ClosedLoopd cl = closed_loop(model, policy);
    const double rho = j.at("rho").get<double>();
    if (!(rho > 0)) throw ConfigParse("model: rho must be positive");
    return ModelBundle{std::move(model), std::move(policy), std::move(spec), std::move(cl), rho};
  });
}

ModelBundle load_model(const std::string& path) {
  try {
    return model_from_json(load_json_file(path));
  } catch (const ConfigParse&) {
    throw;
  } catch (const Error& e) {
    throw ConfigParse("'" + path + "': " + e.what());
  }
}

Json model_to_json(const ModelBundle& b) {
  Json j;
  j["n"] = b.model.n();
  j["p"] = b.model.p();
  j["regions"] = Json::array();
  for (const auto& r : b.model.regions()) {
    Json rj;
    if (const auto* s = r.shell()) {
      rj["kind"] = "radial_shell";
      rj["r_lo"] = s->r_lo;
      rj["r_hi"] = std::isinf(s->r_hi) ? Json("inf") : Json(s->r_hi);
    } else {
      const auto* p = r.polyhedron();
      rj["kind"] = "polyhedral";
      rj["L"] = matrix_to_json(p->L);
      rj["C"] = std::vector<double>(p->C.data(), p->C.data() + p->C.size());
      rj["declared_unbounded"] = r.declared_unbounded();
    }
    j["regions"].push_back(rj);
  }
  j["A"] = Json::array();
  j["B"] = Json::array();
  for (const auto& d : b.model.dynamics()) {
    j["A"].push_back(matrix_to_json(d.A));
    j["B"].push_back(matrix_to_json(d.B));
  }
  j["pi"] = matrix_to_json(b.policy.pi);
  if (b.spec.Q().size() > 0) {
    j["Q"] = matrix_to_json(b.spec.Q());
    j["R"] = matrix_to_json(b.spec.R());
    j["normalize_reward"] = b.spec.normalized();
  } else {
    if (!b.policy.pi.isZero(0.0)) throw InvalidArgument("model_to_json: reward has no Q/R split");
    j["Q"] = matrix_to_json(b.spec.effective());
    j["R"] = matrix_to_json(MatrixXd::Identity(b.model.p(), b.model.p()));
  }
  j["rho"] = b.rho_ball;
  return j;
}

Json certificate_to_json(const Certificate& c) {
  Json j;
  j["n"] = c.n;
  j["rho_ball"] = c.rho_ball;
  j["gamma"] = c.gamma;
  j["c"] = c.c;
  j["K"] = c.K;
  j["r_hat"] = c.r_hat;
  j["s_radius"] = c.s_radius;
  j["lambda"] = c.lambda;
  j["K2"] = c.K2;
  j["log_beta"] = c.log_beta;
  j["lambda_min"] = c.lambda_min;
  j["drift2_verified"] = c.drift2_verified;
  j["gamma_region"] = c.gamma_region;
  j["c_region"] = c.c_region ? Json(*c.c_region) : Json();
  j["nu_hat"] = c.nu_hat_descriptor();
  return j;
}

Certificate certificate_from_json(const Json& j) {
  return with_context("certificate", [&] {
    Certificate c;
    c.n = j.at("n").get<Eigen::Index>();
    c.rho_ball = j.at("rho_ball").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.c = j.at("c").get<double>();
    c.K = j.at("K").get<double>();
    c.r_hat = j.at("r_hat").get<double>();
    c.s_radius = j.at("s_radius").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.K2 = j.at("K2").get<double>();
    c.log_beta = j.at("log_beta").get<double>();
    c.lambda_min = j.value("lambda_min", 0.0);
    c.drift2_verified = j.value("drift2_verified", false);
    c.gamma_region = j.value("gamma_region", std::size_t{0});
    if (j.contains("c_region") && !j.at("c_region").is_null()) c.c_region = j.at("c_region").get<std::size_t>();
    return c;
  });
}

BoundConstants constants_from_json(const Json& j) {
  return with_context("bound constants", [&] {
    BoundConstants c;
    c.c_10as = j.value("c_10as", c.c_10as);
    c.c_1_sq = j.value("c_1_sq", c.c_1_sq);
    c.c_2as0 = j.value("c_2as0", c.c_2as0);
    c.c_2as20 = j.value("c_2as20", c.c_2as20);
    c.o1 = j.value("o1", c.o1);
    c.o2 = j.value("o2", c.o2);
    c.o3 = j.value("o3", c.o3);
    c.leading_C = j.value("leading_C", c.leading_C);
    c.validate();
    return c;
  });
}

Json constants_to_json(const BoundConstants& c) {
  return Json{{"c_10as", c.c_10as}, {"c_1_sq", c.c_1_sq}, {"c_2as0", c.c_2as0},
              {"c_2as20", c.c_2as20}, {"o1", c.o1},         {"o2", c.o2},
              {"o3", c.o3},           {"leading_C", c.leading_C}};
}

SweepConfig sweep_from_json(const Json& j, SweepConfig c) {
  return with_context("sweep config", [&] {
    if (j.contains("dims")) c.dims = grid_from_json<Eigen::Index>(j.at("dims"), "dims");
    if (j.contains("gammas")) c.gammas = grid_from_json<double>(j.at("gammas"), "gammas");
    c.c = j.value("c_root", c.c);
    c.rho_ball = j.value("rho", c.rho_ball);
    c.eps_stop = j.value("eps_stop", c.eps_stop);
    c.trials = j.value("trials", c.trials);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.x0_norm = j.value("x0_norm", c.x0_norm);
    c.master_seed = j.value("master_seed", c.master_seed);
    return c;
  });
}

Json sweep_to_json(const SweepConfig& c) {
  return Json{{"dims", c.dims},         {"gammas", c.gammas},       {"c_root", c.c},
              {"rho", c.rho_ball},      {"eps_stop", c.eps_stop},   {"trials", c.trials},
              {"max_steps", c.max_steps}, {"x0_norm", c.x0_norm}, {"master_seed", c.master_seed}};
}

PipelineConfig pipeline_from_json(const Json& j) {
  return with_context("pipeline config", [&] {
    if (!j.is_object()) throw ConfigParse("pipeline config must be a JSON object");
    PipelineConfig p;
    p.master_seed = j.value("master_seed", p.master_seed);
    p.threads = j.value("threads", p.threads);
    p.out_dir = j.value("out_dir", std::string());
    if (j.contains("dimension_sweep")) {
      SweepConfig base = SweepConfig::desk_dimension();
      base.master_seed = p.master_seed;
      p.dimension = sweep_from_json(j.at("dimension_sweep"), base);
    }
    if (j.contains("gamma_sweep")) {
      SweepConfig base = SweepConfig::desk_gamma();
      base.master_seed = p.master_seed;
      p.gamma = sweep_from_json(j.at("gamma_sweep"), base);
    }
    if (!p.dimension && !p.gamma) throw ConfigParse("pipeline config has no dimension_sweep or gamma_sweep");
    return p;
  });
}

}  // namespace slds
