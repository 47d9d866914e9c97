#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bohm/errors.hpp"
#include "bohm/runner.hpp"

namespace {

enum Exit { kPassed = 0, kChecksFailed = 1, kConfigError = 2, kRunError = 3 };

bohm::json user_config(const std::string& config, const std::string& preset, const std::vector<std::string>& sets,
                       const std::optional<std::uint64_t>& seed) {
  bohm::json user;
  if (!config.empty()) {
    user = bohm::load_config(config);
  } else if (!preset.empty()) {
    user = {{"experiment", preset}};
  } else {
    throw bohm::ConfigParse("give --config PATH or --preset NAME");
  }
  for (const auto& s : sets) bohm::apply_override(user, s);
  if (seed) user["seed"] = *seed;
  return bohm::resolve_config(user);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bohmian trajectory experiments"};
  app.require_subcommand(1);

  std::string config, preset, out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
  run->add_option("--config", config, "JSON config file");
  run->add_option("--preset", preset, "Run a preset with its defaults instead of a config file");
  run->add_option("--out", out, "Output directory (default $BOHMSIM_OUT_ROOT/<experiment>-seed<N>)");
  run->add_option("--seed", seed, "Override the seed");
  run->add_option("--set", sets, "Override a key: dotted.key=value (repeatable)");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", config, "JSON config file")->required();
  validate->add_option("--set", sets, "Override a key: dotted.key=value (repeatable)");

  auto* list = app.add_subcommand("list", "List the preset experiments");

  std::string defaults_name;
  auto* defaults = app.add_subcommand("defaults", "Print the resolved default config of a preset");
  defaults->add_option("name", defaults_name, "Preset name")->required();

  CLI11_PARSE(app, argc, argv);

  if (*list) {
    for (const auto& e : bohm::list_experiments()) std::cout << e.name << '\t' << e.module << '\t' << e.description << '\n';
    return kPassed;
  }
  if (*defaults) {
    try {
      std::cout << bohm::default_config(defaults_name).dump(2) << '\n';
      return kPassed;
    } catch (const bohm::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kConfigError;
    }
  }

  bohm::json resolved;
  try {
    resolved = user_config(config, preset, sets, seed);
    bohm::validate_config(resolved);
  } catch (const bohm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  if (*validate) {
    std::cout << "ok: " << resolved.at("experiment").get<std::string>() << '\n';
    return kPassed;
  }

  const std::string name = resolved.at("experiment").get<std::string>();
  const auto dir = out.empty() ? bohm::default_output_dir(resolved) : std::filesystem::path(out);
  try {
    const auto art = bohm::run_experiment(resolved, dir);
    for (const auto& c : art.checks) {
      std::printf("%s %s: %.6g %s %.6g\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value, c.relation.c_str(),
                  c.threshold);
    }
    std::printf("%s: %s (artifacts in %s)\n", name.c_str(), art.passed ? "passed" : "FAILED", dir.string().c_str());
    return art.passed ? kPassed : kChecksFailed;
  } catch (const bohm::Error& e) {
    std::cerr << "error in experiment " << name << ": " << e.what() << '\n';
    return kRunError;
  } catch (const std::exception& e) {
    std::cerr << "error in experiment " << name << ": " << e.what() << '\n';
    return kRunError;
  }
}
