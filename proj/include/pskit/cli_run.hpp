#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

// Declarative scenario configs in, deterministic tables out. A config holds
// exactly one task object (simulate / irf / oracle / estimate / randtest /
// invert / control) plus the system it runs on and a seed.

namespace pskit::cli {

inline constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {  // exit 2
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {  // exit 3
  using std::runtime_error::runtime_error;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  std::string summary;  // one line per result row
};

// Resolves a path, or a bundled scenario name when no such file exists.
nlohmann::json load_config(const std::string& path_or_name);

// Name of the single task key; throws ConfigError("exactly one task")
// otherwise.
std::string task_of(const nlohmann::json& config);

RunManifest run_config(const nlohmann::json& config, const std::string& out_dir,
                       std::optional<std::uint64_t> seed_override = {},
                       int workers = 1);
RunManifest run(const std::string& config_path_or_name,
                const std::string& out_dir,
                std::optional<std::uint64_t> seed_override = {},
                int workers = 1);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace pskit::cli
