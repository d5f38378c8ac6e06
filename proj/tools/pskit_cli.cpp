#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pskit/cli_run.hpp"
#include "pskit/scenarios.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

void add_common(CLI::App* sub, CommonOpts& opts, bool need_config = true) {
  auto* c = sub->add_option("--config", opts.config,
                            "config file path or bundled scenario name");
  if (need_config) c->required();
  sub->add_option("--out", opts.out, "output directory");
  sub->add_option_function<std::uint64_t>(
      "--seed", [&opts](std::uint64_t s) { opts.seed = s; },
      "seed override");
  sub->add_option("--workers", opts.workers, "worker thread count");
}

int run_task(const std::string& expected_task, const CommonOpts& opts) {
  try {
    nlohmann::json config = pskit::cli::load_config(opts.config);
    std::string task = pskit::cli::task_of(config);
    if (task != expected_task)
      throw pskit::cli::ConfigError("config task is '" + task +
                                    "', expected '" + expected_task + "'");
    auto man = pskit::cli::run_config(config, opts.out, opts.seed,
                                      opts.workers);
    std::cout << man.summary;
    return 0;
  } catch (const pskit::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pskit::cli::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"potential-system simulation and inference toolkit"};
  app.require_subcommand(1);

  const char* tasks[] = {"simulate", "irf",    "oracle", "estimate",
                         "randtest", "invert", "control"};
  std::vector<std::pair<std::string, CommonOpts>> opts_by_task;
  opts_by_task.reserve(7);
  std::vector<CLI::App*> subs;
  for (const char* t : tasks) {
    opts_by_task.emplace_back(t, CommonOpts{});
    auto* sub = app.add_subcommand(t, std::string("run a '") + t +
                                          "' task config");
    add_common(sub, opts_by_task.back().second);
    subs.push_back(sub);
  }

  auto* scenarios_sub =
      app.add_subcommand("scenarios", "list bundled scenario configs");
  std::string dump_dir;
  scenarios_sub->add_option("--out", dump_dir,
                            "also write each config as JSON into this dir");

  CLI11_PARSE(app, argc, argv);

  if (scenarios_sub->parsed()) {
    for (const auto& s : pskit::scen::bundled()) {
      std::cout << s.name << ": " << s.description << "\n";
      if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        std::ofstream os(std::filesystem::path(dump_dir) /
                         (s.name + ".json"));
        os << s.config.dump(2) << "\n";
      }
    }
    return 0;
  }
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed())
      return run_task(opts_by_task[i].first, opts_by_task[i].second);
  return 2;
}
