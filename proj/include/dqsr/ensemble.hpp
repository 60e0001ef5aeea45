#pragma once

// Trajectory ensembles, Born-rule deviation metrics and dt / eta sweeps.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dqsr/generators.hpp"
#include "dqsr/integrate.hpp"
#include "dqsr/state.hpp"

namespace dqsr {

// L1 distance between outcome frequencies and the initial Born weights.
// Throws std::invalid_argument on an empty ensemble or a size mismatch.
double born_deviation(std::span<const std::uint64_t> counts, const WeightVector& initial);

// sqrt(sum_j w_j (1 - w_j) / n).
double binomial_standard_error(const WeightVector& initial, std::uint64_t n);

struct EnsembleOptions {
  // SingleLambda only: replace random lambda by the grid (i + 1/2) / n.
  bool stratified = false;
  // Worker threads; 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
  // Logarithmically spaced points in the deviation-vs-time series.
  std::size_t checkpoints = 64;
};

struct DeviationPoint {
  double time = 0.0;
  double deviation = 0.0;
};

struct EnsembleReport {
  ModelSpec model;
  WeightVector initial = WeightVector::uniform(2);
  IntegratorConfig config;
  std::uint64_t master_seed = 0;
  bool stratified = false;
  std::uint64_t n_trajectories = 0;
  std::vector<std::uint64_t> outcome_counts;
  std::uint64_t unresolved_count = 0;
  // Running-argmax classification at log-spaced times.
  std::vector<DeviationPoint> deviation_series;
  // born_deviation of the resolved outcomes; NaN if none resolved.
  double final_deviation = 0.0;
  double max_halt_time = 0.0;

  friend bool operator==(const EnsembleReport&, const EnsembleReport&);
};

// Outcome of one trajectory as seen by the ensemble.
struct TrajectorySummary {
  std::optional<std::size_t> outcome;
  double halt_time = 0.0;
  std::size_t initial_leader = 0;
  // (time, new leading index) whenever the running argmax changes.
  std::vector<std::pair<double, std::size_t>> leader_changes;
};

// Runs one trajectory to halt, tracking running-argmax changes.
TrajectorySummary summarize_trajectory(Trajectory& trajectory);

// Partial ensemble result. Merging is commutative and associative, so any
// partition of the stream indices yields the same report.
class EnsembleAccumulator {
 public:
  explicit EnsembleAccumulator(std::size_t n_states);

  void add(const TrajectorySummary& summary);
  void merge(const EnsembleAccumulator& other);

  std::uint64_t size() const noexcept { return n_; }

  EnsembleReport finalize(const ModelSpec& model, const WeightVector& initial,
                          const IntegratorConfig& cfg, std::uint64_t master_seed,
                          const EnsembleOptions& options) const;

 private:
  struct Event {
    double time;
    std::uint32_t from;
    std::uint32_t to;
    auto operator<=>(const Event&) const = default;
  };

  std::size_t n_states_;
  std::uint64_t n_ = 0;
  std::uint64_t unresolved_ = 0;
  std::vector<std::uint64_t> outcomes_;
  std::vector<std::uint64_t> initial_leaders_;
  std::vector<Event> events_;
  double max_time_ = 0.0;
};

// Trajectories first .. first+count-1 of an ensemble of `total` (total only
// matters for stratified draws). Trajectory i uses stream (master_seed, i).
EnsembleAccumulator run_ensemble_range(const WeightVector& initial, const ModelSpec& model,
                                       const IntegratorConfig& cfg, std::uint64_t first,
                                       std::uint64_t count, std::uint64_t total,
                                       std::uint64_t master_seed, const EnsembleOptions& options = {});

EnsembleReport run_ensemble(const WeightVector& initial, const ModelSpec& model,
                            const IntegratorConfig& cfg, std::uint64_t n, std::uint64_t master_seed,
                            const EnsembleOptions& options = {});

enum class SweepAxis { Dt, Eta };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view name);

struct SweepPoint {
  double value = 0.0;
  double deviation = 0.0;
  double standard_error = 0.0;
  EnsembleReport report;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::Dt;
  std::vector<SweepPoint> points;
};

// One ensemble per value, all with the same master seed. For the Eta axis an
// optional `paired_dt` list (same length as `values`) sets dt per point.
SweepTable sweep(const WeightVector& initial, const ModelSpec& model, const IntegratorConfig& cfg,
                 SweepAxis axis, std::span<const double> values, std::uint64_t n,
                 std::uint64_t master_seed, const EnsembleOptions& options = {},
                 std::span<const double> paired_dt = {});

}  // namespace dqsr
