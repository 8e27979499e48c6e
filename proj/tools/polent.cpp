// polent command-line front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "polent/harness/presets.hpp"
#include "polent/harness/runner.hpp"

namespace {

namespace h = polent::harness;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

h::ExperimentConfig load(const std::string& config_path, const std::string& preset_name) {
  if (!preset_name.empty()) return h::preset(preset_name);
  std::ifstream in(config_path);
  if (!in) throw h::ConfigError("cannot open config '" + config_path + "'");
  return h::parse_config_with_presets(in);
}

// --out, then the config's output key, then POLENT_OUT_DIR, then ./polent_out.
std::filesystem::path output_dir(const std::string& cli_out, const h::ExperimentConfig& cfg) {
  if (!cli_out.empty()) return cli_out;
  if (!cfg.output.empty()) return cfg.output;
  if (const char* env = std::getenv("POLENT_OUT_DIR"); env && *env) return env;
  return "polent_out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for a polarization-entangled photon-pair source: HOM dip/peak, DWDM splitting and CHSH"};
  app.set_version_flag("--version", std::string(POLENT_VERSION));
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  auto* run = app.add_subcommand("run", "run a scenario and write its CSV outputs and manifest");
  auto* cfg_opt = run->add_option("-c,--config", config_path, "experiment config (INI)")->check(CLI::ExistingFile);
  run->add_option("-p,--preset", preset_name, "run a named preset instead of a config file")->excludes(cfg_opt);
  run->add_option("-s,--seed", seed, "override the RNG seed");
  run->add_option("-o,--out", out_dir, "output directory");
  run->add_option("-j,--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));

  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("-c,--config", config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);

  auto* presets = app.add_subcommand("preset", "list or show the built-in presets");
  presets->require_subcommand(1);
  auto* list = presets->add_subcommand("list", "list preset names");
  std::string show_name;
  auto* show = presets->add_subcommand("show", "print a preset as a config file");
  show->add_option("name", show_name, "preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version land here too, with exit code 0.
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (list->parsed()) {
      for (const auto& p : h::preset_list()) std::cout << p.name << "\t" << p.summary << '\n';
      return kExitOk;
    }
    if (show->parsed()) {
      std::cout << h::serialize_config(h::preset(show_name));
      return kExitOk;
    }
  } catch (const h::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  h::ExperimentConfig cfg;
  try {
    if (run->parsed() && config_path.empty() && preset_name.empty())
      throw h::ConfigError("run needs --config or --preset");
    cfg = load(config_path, preset_name);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    h::validate(cfg);
  } catch (const h::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitValidation;
  }

  if (validate->parsed()) {
    std::cout << "ok: scenario " << h::to_string(cfg.scenario) << '\n';
    return kExitOk;
  }

  const auto dir = output_dir(out_dir, cfg);
  try {
    const auto result = h::execute(cfg);
    h::write_outputs(result, dir);
    std::cout << "wrote " << result.files.size() << " files to " << dir.string() << '\n';
    if (const auto* summary = result.find("summary.txt")) std::cout << *summary;
  } catch (const h::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
