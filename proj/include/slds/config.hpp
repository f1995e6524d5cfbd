#pragma once

// JSON configuration: model files, certificate files, bound constants and
// sweep / pipeline configs. Matrices are row-major nested arrays.

#include <string>

#include "json.hpp"
#include "slds/bench.hpp"
#include "slds/bounds.hpp"
#include "slds/ergodicity.hpp"

namespace slds {

using Json = nlohmann::json;

/// Whole file as a string; ConfigParse naming the path when unreadable.
std::string read_text_file(const std::string& path);
Json load_json_file(const std::string& path);
/// Throws IoError naming the path.
void write_text_file(const std::string& path, const std::string& contents);

/// Model schema:
///   {"n", "p", "regions": [{"kind": "radial_shell", "r_lo", "r_hi" (number,
///   "inf" or null)} | {"kind": "polyhedral", "L", "C", "declared_unbounded"}],
///   "A": [...], "B": [...], "pi", "Q", "R", "rho", "normalize_reward"}
/// or the shorthand {"case_study": {"n", "gamma_root", "c_root", "rho"}}.
ModelBundle model_from_json(const Json& j);
ModelBundle load_model(const std::string& path);
Json model_to_json(const ModelBundle& bundle);

Json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const Json& j);

BoundConstants constants_from_json(const Json& j);
Json constants_to_json(const BoundConstants& c);

/// Keys: dims / gammas (array or {"start", "stop", "step"}), c_root, rho,
/// eps_stop, trials, max_steps, x0_norm, master_seed. Missing keys keep `base`.
SweepConfig sweep_from_json(const Json& j, SweepConfig base);
Json sweep_to_json(const SweepConfig& c);

/// {"master_seed", "threads", "dimension_sweep": {...}, "gamma_sweep": {...}}.
PipelineConfig pipeline_from_json(const Json& j);

}  // namespace slds
