#pragma once

// Run configuration, file emission (CSV / JSON / SVG) and the four commands
// behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqsr/ensemble.hpp"
#include "dqsr/generators.hpp"
#include "dqsr/integrate.hpp"
#include "dqsr/stochastic.hpp"

namespace dqsr {

// Invalid configuration; field() names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string model = "two_state";
  // 0 means "infer from initial_weights".
  std::size_t n_states = 0;
  // Empty means the uniform preset.
  std::vector<double> initial_weights;
  double rate = 1.0;
  double eta = 0.1;
  double dt = kDefaultDt;
  std::string scheme = "euler";
  // "auto", "angle" or "amplitude".
  std::string form = "auto";
  double threshold = kDefaultOutcomeThreshold;
  std::uint64_t max_steps = kDefaultMaxSteps;
  bool normalize_each_step = true;
  std::uint64_t record_stride = 1;

  std::uint64_t n_trajectories = 1000;
  std::uint64_t master_seed = 1;
  // Stream used by the trajectory command.
  std::uint64_t trajectory_index = 0;
  // Explicit stochastic variables for the trajectory command.
  std::vector<double> draws;
  std::string draw_convention = "lambda";
  bool stratified = false;
  std::size_t checkpoints = 64;
  unsigned threads = 0;

  std::string sweep_axis = "dt";
  std::vector<double> sweep_values;
  // Per-point dt for an eta sweep; empty keeps `dt`.
  std::vector<double> sweep_dt;

  std::vector<double> field_eta{0.02, 0.2, 0.5};
  unsigned field_gamma = kDefaultGamma;
  std::size_t field_grid_points = 64;
  std::size_t field_bins = 50;
  std::size_t field_samples = 50'000;
  double field_x = 0.3;

  std::string out_dir = "out";
  bool svg = false;

  // Parses a flat JSON object. Unknown keys and wrong types throw ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);
  // Every computational field; out_dir, svg and threads are left out because
  // they do not affect any number written.
  nlohmann::json to_json() const;

  // Throws ConfigError naming the first invalid field.
  void validate() const;

  WeightVector weights() const;
  ModelSpec model_spec() const;
  IntegratorConfig integrator() const;
  EnsembleOptions ensemble_options() const;
  FieldSpec field_spec(double field_eta_value) const;
};

// {"config": ..., "master_seed": ...}, plus the members of `extra` if it is an object.
nlohmann::json provenance(const RunConfig& cfg, const nlohmann::json& extra = nullptr);
// "# " + compact provenance JSON; the first line of every CSV.
std::string provenance_comment(const RunConfig& cfg, const nlohmann::json& extra = nullptr);

// %.17g; NaN as "nan".
std::string format_number(double v);

// Header row plus numeric rows, LF line endings, preceded by the provenance comment.
void write_csv(const std::filesystem::path& path, const std::string& provenance_line,
               const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);
void write_text(const std::filesystem::path& path, const std::string& content);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<PlotSeries> series;
};

// Self-contained SVG line plot; `metadata` is embedded verbatim (escaped).
std::string render_svg(const PlotSpec& plot, const std::string& metadata);

nlohmann::json report_to_json(const EnsembleReport& report);

// Each command writes into cfg.out_dir and returns the files written.
std::vector<std::filesystem::path> cmd_trajectory(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_ensemble(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_sweep(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_field_pdf(const RunConfig& cfg);

}  // namespace dqsr
