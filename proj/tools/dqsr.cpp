#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dqsr/cli_io.hpp"
#include "dqsr/errors.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool svg = false;
};

using Command = std::function<std::vector<std::filesystem::path>(const dqsr::RunConfig&)>;

int run(const Flags& flags, const Command& command) {
  try {
    auto cfg = flags.config_path.empty() ? dqsr::RunConfig{} : dqsr::RunConfig::from_file(flags.config_path);
    if (flags.seed) cfg.master_seed = *flags.seed;
    if (flags.out) cfg.out_dir = *flags.out;
    if (flags.svg) cfg.svg = true;
    for (const auto& f : command(cfg)) std::printf("%s\n", f.string().c_str());
    return dqsr::kExitOk;
  } catch (const dqsr::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return dqsr::kExitConfig;
  } catch (const dqsr::NumericalBlowup& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return dqsr::kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return dqsr::kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical state reduction simulator"};
  app.require_subcommand(1);

  Flags flags;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands{
      {"trajectory", {"Integrate one trajectory and write its weights", dqsr::cmd_trajectory}},
      {"ensemble", {"Run an ensemble and report the deviation from Born weights", dqsr::cmd_ensemble}},
      {"sweep", {"Run one ensemble per dt or eta value", dqsr::cmd_sweep}},
      {"field-pdf", {"Histogram the random field", dqsr::cmd_field_pdf}},
  };
  Command chosen;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", flags.config_path, "Flat JSON configuration file");
    sub->add_option("--seed", flags.seed, "Master seed (overrides the file)");
    sub->add_option("--out", flags.out, "Output directory (overrides the file)");
    sub->add_flag("--svg", flags.svg, "Also write SVG plots");
    sub->callback([&chosen, cmd = entry.second] { chosen = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? dqsr::kExitOk : dqsr::kExitConfig;
  }
  return run(flags, chosen);
}
