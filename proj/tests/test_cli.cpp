#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pskit/cli_run.hpp"
#include "pskit/ps_core.hpp"
#include "pskit/scenarios.hpp"

using namespace pskit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / ("pskit-test-" + leaf);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary);
  os << body;
}

// spawns the installed binary and returns its exit code
int run_cli(const std::string& args) {
  std::string cmd = std::string(PSKIT_CLI_PATH) + " " + args;
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("bundled catalog covers the six scenarios and all validate") {
  auto all = scen::bundled();
  std::set<std::string> names;
  for (const auto& s : all) {
    names.insert(s.name);
    CHECK_FALSE(s.description.empty());
    CHECK_NOTHROW(cli::task_of(s.config));
    if (s.config.contains("system")) {
      auto spec = scen::make_system(s.config.at("system"), 20);
      CHECK(validate_system(spec).empty());
    }
  }
  std::set<std::string> expect = {"linear-confounded", "news-impact",
                                  "iv-encouragement", "randtest-fisher",
                                  "proxy-attenuation", "control-toy"};
  CHECK(names == expect);
}

TEST_CASE("a config must hold exactly one task object") {
  nlohmann::json none = {{"seed", 1}};
  CHECK_THROWS_WITH_AS(cli::task_of(none), "exactly one task",
                       cli::ConfigError);
  nlohmann::json two = {{"simulate", nlohmann::json::object()},
                        {"irf", nlohmann::json::object()}};
  CHECK_THROWS_WITH_AS(cli::task_of(two), "exactly one task",
                       cli::ConfigError);
  nlohmann::json one = {{"oracle", nlohmann::json::object()}};
  CHECK(cli::task_of(one) == "oracle");
}

TEST_CASE("load_config resolves files first, then bundled names") {
  CHECK(cli::load_config("news-impact") ==
        scen::bundled("news-impact").config);
  CHECK_THROWS_AS(cli::load_config("no-such-scenario"), cli::ConfigError);

  fs::path dir = fresh_dir("load-config");
  fs::path good = dir / "cfg.json";
  write_file(good, R"({"seed": 7, "simulate": {"T": 3}})");
  CHECK(cli::load_config(good.string()).at("seed").get<int>() == 7);

  fs::path bad = dir / "bad.json";
  write_file(bad, "{ this is not json");
  CHECK_THROWS_AS(cli::load_config(bad.string()), cli::ConfigError);
}

TEST_CASE("fnv1a_hex matches the published 64-bit test vectors") {
  CHECK(cli::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(cli::fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(cli::fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("identical configs produce byte-identical task outputs") {
  nlohmann::json config = scen::bundled("news-impact").config;
  config["oracle"]["nReps"] = 200;
  fs::path d1 = fresh_dir("det-1"), d2 = fresh_dir("det-2");
  auto m1 = cli::run_config(config, d1.string());
  auto m2 = cli::run_config(config, d2.string());
  CHECK(m1.config_hash == m2.config_hash);
  CHECK(m1.seed == m2.seed);
  REQUIRE(m1.outputs.size() == 1);
  std::string body1 = read_file(d1 / "oracle.json");
  CHECK(body1 == read_file(d2 / "oracle.json"));

  // the manifest records the content hash of each output file
  auto man = nlohmann::json::parse(read_file(d1 / "manifest.json"));
  CHECK(man.at("configHash").get<std::string>() == m1.config_hash);
  REQUIRE(man.at("outputs").size() == 1);
  CHECK(man.at("outputs").at(0).at("path").get<std::string>() ==
        "oracle.json");
  CHECK(man.at("outputs").at(0).at("hash").get<std::string>() ==
        cli::fnv1a_hex(body1));
}

TEST_CASE("irf task writes the geometric outcome response to CSV") {
  nlohmann::json config = {
      {"seed", 1},
      {"system",
       {{"kind", "linear"},
        {"gamma0A", {{2.0}}},
        {"gamma1", {{0.0, 0.5}}}}},
      {"irf", {{"H", 2}}}};
  fs::path dir = fresh_dir("irf-csv");
  auto man = cli::run_config(config, dir.string());
  CHECK(man.summary.find("irf H=2") != std::string::npos);

  std::istringstream csv(read_file(dir / "irf.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "h,block,row,col,psi,theta");
  std::vector<double> psi_y;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string h, block, r, c, psi, theta;
    std::getline(row, h, ',');
    std::getline(row, block, ',');
    std::getline(row, r, ',');
    std::getline(row, c, ',');
    std::getline(row, psi, ',');
    std::getline(row, theta, ',');
    if (block == "y" && c == "0") psi_y.push_back(std::stod(psi));
  }
  REQUIRE(psi_y.size() == 3);
  CHECK(psi_y[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(psi_y[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(psi_y[2] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("seed override changes the outputs, not the config hash") {
  nlohmann::json config = scen::bundled("news-impact").config;
  config["oracle"]["nReps"] = 100;
  fs::path d1 = fresh_dir("seed-1"), d2 = fresh_dir("seed-2");
  auto m1 = cli::run_config(config, d1.string());
  auto m2 = cli::run_config(config, d2.string(), std::uint64_t(999));
  CHECK(m1.config_hash == m2.config_hash);
  CHECK(m2.seed == 999);
  CHECK(read_file(d1 / "oracle.json") != read_file(d2 / "oracle.json"));
}

TEST_CASE("binary exit codes distinguish config, validation and runtime") {
  fs::path dir = fresh_dir("exit-codes");
  std::string devnull = " > /dev/null 2>&1";

  // listing bundled scenarios succeeds
  CHECK(run_cli("scenarios" + devnull) == 0);

  // a small oracle run from a config file succeeds
  nlohmann::json ok = scen::bundled("news-impact").config;
  ok["oracle"]["nReps"] = 50;
  write_file(dir / "ok.json", ok.dump());
  CHECK(run_cli("oracle --config " + (dir / "ok.json").string() + " --out " +
                (dir / "ok-out").string() + devnull) == 0);
  CHECK(fs::exists(dir / "ok-out" / "oracle.json"));

  // subcommand / task mismatch is a config error
  CHECK(run_cli("irf --config news-impact --out " + (dir / "x").string() +
                devnull) == 2);
  // unknown bundled name is a config error
  CHECK(run_cli("oracle --config no-such-scenario" + devnull) == 2);
  // unparseable JSON is a config error
  write_file(dir / "bad.json", "{ not json");
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string() +
                devnull) == 2);

  // irf on a non-linear system is a validation error
  nlohmann::json nonlinear = {{"system", {{"kind", "news-impact"}}},
                              {"irf", {{"H", 2}}}};
  write_file(dir / "nonlinear.json", nonlinear.dump());
  CHECK(run_cli("irf --config " + (dir / "nonlinear.json").string() +
                " --out " + (dir / "y").string() + devnull) == 3);

  // branching past the end of the horizon is a runtime error
  nlohmann::json overrun = {{"system", {{"kind", "news-impact"}}},
                            {"oracle",
                             {{"T", 5},
                              {"t", 4},
                              {"h", 5},
                              {"nReps", 10},
                              {"a", {1.0}},
                              {"aPrime", {0.0}}}}};
  write_file(dir / "overrun.json", overrun.dump());
  CHECK(run_cli("oracle --config " + (dir / "overrun.json").string() +
                " --out " + (dir / "z").string() + devnull) == 4);
}
