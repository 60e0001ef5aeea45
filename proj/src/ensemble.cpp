#include "dqsr/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "dqsr/errors.hpp"

namespace dqsr {

double born_deviation(std::span<const std::uint64_t> counts, const WeightVector& initial) {
  if (counts.size() != initial.size()) {
    throw std::invalid_argument("born_deviation: counts and weights differ in length");
  }
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("born_deviation: empty ensemble");
  double dev = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    dev += std::abs(static_cast<double>(counts[j]) / static_cast<double>(total) - initial[j]);
  }
  return dev;
}

double binomial_standard_error(const WeightVector& initial, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("binomial_standard_error: n must be >= 1");
  double var = 0.0;
  for (double w : initial.values()) var += w * (1.0 - w);
  return std::sqrt(var / static_cast<double>(n));
}

bool operator==(const EnsembleReport& a, const EnsembleReport& b) {
  auto same_double = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  if (a.deviation_series.size() != b.deviation_series.size()) return false;
  for (std::size_t k = 0; k < a.deviation_series.size(); ++k) {
    if (a.deviation_series[k].time != b.deviation_series[k].time ||
        a.deviation_series[k].deviation != b.deviation_series[k].deviation) {
      return false;
    }
  }
  return a.model.kind == b.model.kind && a.model.rate == b.model.rate && a.model.eta == b.model.eta &&
         a.model.n_states == b.model.n_states && a.initial == b.initial &&
         a.master_seed == b.master_seed && a.stratified == b.stratified &&
         a.n_trajectories == b.n_trajectories && a.outcome_counts == b.outcome_counts &&
         a.unresolved_count == b.unresolved_count && same_double(a.final_deviation, b.final_deviation) &&
         a.max_halt_time == b.max_halt_time;
}

TrajectorySummary summarize_trajectory(Trajectory& trajectory) {
  TrajectorySummary s;
  s.initial_leader = trajectory.leading_index();
  std::size_t leader = s.initial_leader;
  while (trajectory.advance()) {
    const std::size_t now = trajectory.leading_index();
    if (now != leader) {
      s.leader_changes.emplace_back(trajectory.time(), now);
      leader = now;
    }
  }
  const std::size_t last = trajectory.leading_index();
  if (last != leader) s.leader_changes.emplace_back(trajectory.time(), last);
  s.outcome = trajectory.outcome();
  s.halt_time = trajectory.time();
  return s;
}

EnsembleAccumulator::EnsembleAccumulator(std::size_t n_states)
    : n_states_(n_states), outcomes_(n_states, 0), initial_leaders_(n_states, 0) {}

void EnsembleAccumulator::add(const TrajectorySummary& summary) {
  ++n_;
  if (summary.outcome) {
    ++outcomes_.at(*summary.outcome);
  } else {
    ++unresolved_;
  }
  ++initial_leaders_.at(summary.initial_leader);
  auto from = static_cast<std::uint32_t>(summary.initial_leader);
  for (const auto& [t, to] : summary.leader_changes) {
    events_.push_back({t, from, static_cast<std::uint32_t>(to)});
    from = static_cast<std::uint32_t>(to);
  }
  max_time_ = std::max(max_time_, summary.halt_time);
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& other) {
  if (other.n_states_ != n_states_) throw std::invalid_argument("ensemble merge: N differs");
  n_ += other.n_;
  unresolved_ += other.unresolved_;
  for (std::size_t j = 0; j < n_states_; ++j) {
    outcomes_[j] += other.outcomes_[j];
    initial_leaders_[j] += other.initial_leaders_[j];
  }
  events_.insert(events_.end(), other.events_.begin(), other.events_.end());
  max_time_ = std::max(max_time_, other.max_time_);
}

EnsembleReport EnsembleAccumulator::finalize(const ModelSpec& model, const WeightVector& initial,
                                             const IntegratorConfig& cfg, std::uint64_t master_seed,
                                             const EnsembleOptions& options) const {
  EnsembleReport r;
  r.model = model;
  r.initial = initial;
  r.config = cfg;
  r.master_seed = master_seed;
  r.stratified = options.stratified;
  r.n_trajectories = n_;
  r.outcome_counts = outcomes_;
  r.unresolved_count = unresolved_;
  r.max_halt_time = max_time_;
  r.final_deviation = n_ > unresolved_ ? born_deviation(outcomes_, initial)
                                       : std::numeric_limits<double>::quiet_NaN();

  if (n_ == 0) return r;
  auto events = events_;
  std::sort(events.begin(), events.end());

  const double t_first = cfg.dt / model.rate;
  const double t_last = std::max(max_time_, t_first);
  const std::size_t points = std::max<std::size_t>(options.checkpoints, 2);
  std::vector<std::uint64_t> classes = initial_leaders_;
  std::size_t next_event = 0;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < points; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(points - 1);
    double t = k + 1 == points ? t_last : t_first * std::pow(t_last / t_first, frac);
    if (k > 0 && t <= r.deviation_series.back().time) continue;
    while (next_event < events.size() && events[next_event].time <= t) {
      --classes[events[next_event].from];
      ++classes[events[next_event].to];
      ++next_event;
    }
    double dev = 0.0;
    for (std::size_t j = 0; j < n_states_; ++j) {
      dev += std::abs(static_cast<double>(classes[j]) * inv_n - initial[j]);
    }
    r.deviation_series.push_back({t, dev});
  }
  return r;
}

namespace {

StochasticDraw ensemble_draw(const WeightVector& initial, const ModelSpec& model,
                             const IntegratorConfig& cfg, std::uint64_t index, std::uint64_t total,
                             std::uint64_t master_seed, const EnsembleOptions& options) {
  if (options.stratified) {
    const double lambda = (static_cast<double>(index) + 0.5) / static_cast<double>(total);
    return StochasticDraw({lambda}, DrawConvention::Lambda);
  }
  return draw_for_trajectory(initial, model, cfg, SeedSpec{master_seed, index});
}

}  // namespace

EnsembleAccumulator run_ensemble_range(const WeightVector& initial, const ModelSpec& model,
                                       const IntegratorConfig& cfg, std::uint64_t first,
                                       std::uint64_t count, std::uint64_t total,
                                       std::uint64_t master_seed, const EnsembleOptions& options) {
  model.validate();
  cfg.validate();
  if (initial.size() != model.n_states) {
    throw ModelMismatch("initial weights have " + std::to_string(initial.size()) +
                        " entries, model has n_states = " + std::to_string(model.n_states));
  }
  if (options.stratified && model.kind != ModelKind::SingleLambda) {
    throw std::invalid_argument("stratified draws are only defined for the single_lambda model");
  }
  unsigned threads = options.threads == 0 ? std::max(1U, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(count, 1)));

  constexpr std::uint64_t kChunk = 64;
  std::atomic<std::uint64_t> next{0};
  std::vector<EnsembleAccumulator> partial(threads, EnsembleAccumulator(model.n_states));
  std::mutex error_mutex;
  std::uint64_t failed_index = std::numeric_limits<std::uint64_t>::max();
  std::string failure;
  std::atomic<bool> stop{false};

  auto worker = [&](unsigned w) {
    for (;;) {
      const std::uint64_t begin = next.fetch_add(kChunk);
      if (begin >= count || stop.load()) return;
      const std::uint64_t end = std::min(count, begin + kChunk);
      for (std::uint64_t k = begin; k < end; ++k) {
        const std::uint64_t index = first + k;
        try {
          Trajectory t(initial, model, cfg,
                       ensemble_draw(initial, model, cfg, index, total, master_seed, options));
          partial[w].add(summarize_trajectory(t));
        } catch (const NumericalBlowup& e) {
          std::lock_guard lock(error_mutex);
          if (index < failed_index) {
            failed_index = index;
            failure = e.what();
          }
          stop = true;
          return;
        }
      }
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  if (stop) {
    throw NumericalBlowup(0, "trajectory " + std::to_string(failed_index) + ": " + failure);
  }
  EnsembleAccumulator merged(model.n_states);
  for (const auto& p : partial) merged.merge(p);
  return merged;
}

EnsembleReport run_ensemble(const WeightVector& initial, const ModelSpec& model,
                            const IntegratorConfig& cfg, std::uint64_t n, std::uint64_t master_seed,
                            const EnsembleOptions& options) {
  if (n == 0) throw std::invalid_argument("ensemble size must be >= 1");
  return run_ensemble_range(initial, model, cfg, 0, n, n, master_seed, options)
      .finalize(model, initial, cfg, master_seed, options);
}

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::Dt ? "dt" : "eta"; }

SweepAxis sweep_axis_from_string(std::string_view name) {
  if (name == "dt") return SweepAxis::Dt;
  if (name == "eta") return SweepAxis::Eta;
  throw std::invalid_argument("unknown sweep axis '" + std::string(name) + "' (expected dt or eta)");
}

SweepTable sweep(const WeightVector& initial, const ModelSpec& model, const IntegratorConfig& cfg,
                 SweepAxis axis, std::span<const double> values, std::uint64_t n,
                 std::uint64_t master_seed, const EnsembleOptions& options,
                 std::span<const double> paired_dt) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  const bool increasing = values.size() < 2 || values[1] > values[0];
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (increasing ? !(values[k] > values[k - 1]) : !(values[k] < values[k - 1])) {
      throw std::invalid_argument("sweep values must be strictly monotone");
    }
  }
  if (!paired_dt.empty()) {
    if (axis != SweepAxis::Eta) throw std::invalid_argument("paired dt values only apply to an eta sweep");
    if (paired_dt.size() != values.size()) {
      throw std::invalid_argument("paired dt list must match the sweep values in length");
    }
  }
  SweepTable table;
  table.axis = axis;
  for (std::size_t k = 0; k < values.size(); ++k) {
    ModelSpec m = model;
    IntegratorConfig c = cfg;
    if (axis == SweepAxis::Dt) {
      if (!(values[k] > 0.0)) throw std::invalid_argument("dt sweep values must be > 0");
      c.dt = values[k];
    } else {
      if (!(values[k] > 0.0 && values[k] <= 1.0)) throw std::invalid_argument("eta sweep values must lie in (0, 1]");
      m.eta = values[k];
      if (!paired_dt.empty()) c.dt = paired_dt[k];
    }
    SweepPoint point;
    point.value = values[k];
    point.report = run_ensemble(initial, m, c, n, master_seed, options);
    point.deviation = point.report.final_deviation;
    point.standard_error = binomial_standard_error(initial, n);
    table.points.push_back(std::move(point));
  }
  return table;
}

}  // namespace dqsr
