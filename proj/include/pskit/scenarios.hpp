#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pskit/control.hpp"
#include "pskit/linear_ps.hpp"

// Bundled scenario configs (one per headline construct) and the JSON system
// factory the CLI uses to build simulable specs.

namespace pskit::scen {

using nlohmann::json;

struct Scenario {
  std::string name;
  std::string description;
  json config;
};

std::vector<Scenario> bundled();
const Scenario& bundled(const std::string& name);

// system object: {"kind": "linear"|"news-impact"|"iv-encouragement", ...}
SystemSpec make_system(const json& system, int horizon_T);
linear::LinearStructural linear_from_json(const json& system);

// control object: actions/outcomes/noise probs, transition and loss tables
ctrl::FinitePS finite_ps_from_json(const json& control);
ctrl::LossSpec loss_from_json(const json& control, const ctrl::FinitePS& fps);

Mat json_to_mat(const json& j, Eigen::Index rows, Eigen::Index cols);
Vec json_to_vec(const json& j);

}  // namespace pskit::scen
