#include "dqsr/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dqsr/errors.hpp"

namespace dqsr {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

std::uint64_t as_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError(key, "expected a non-negative integer");
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_number(x, key));
  return out;
}

unsigned as_small_count(const json& v, const std::string& key) {
  const auto n = as_count(v, key);
  if (n > 1'000'000) throw ConfigError(key, "value too large");
  return static_cast<unsigned>(n);
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"model", [](RunConfig& c, const json& v, const std::string& k) { c.model = as_string(v, k); }},
      {"n_states", [](RunConfig& c, const json& v, const std::string& k) { c.n_states = as_count(v, k); }},
      {"initial_weights",
       [](RunConfig& c, const json& v, const std::string& k) {
         if (v.is_string()) {
           if (v.get<std::string>() != "uniform") throw ConfigError(k, "the only named preset is \"uniform\"");
           c.initial_weights.clear();
         } else {
           c.initial_weights = as_numbers(v, k);
           if (c.initial_weights.empty()) throw ConfigError(k, "must not be empty");
         }
       }},
      {"rate", [](RunConfig& c, const json& v, const std::string& k) { c.rate = as_number(v, k); }},
      {"eta", [](RunConfig& c, const json& v, const std::string& k) { c.eta = as_number(v, k); }},
      {"dt", [](RunConfig& c, const json& v, const std::string& k) { c.dt = as_number(v, k); }},
      {"scheme", [](RunConfig& c, const json& v, const std::string& k) { c.scheme = as_string(v, k); }},
      {"form", [](RunConfig& c, const json& v, const std::string& k) { c.form = as_string(v, k); }},
      {"threshold", [](RunConfig& c, const json& v, const std::string& k) { c.threshold = as_number(v, k); }},
      {"max_steps", [](RunConfig& c, const json& v, const std::string& k) { c.max_steps = as_count(v, k); }},
      {"normalize_each_step",
       [](RunConfig& c, const json& v, const std::string& k) { c.normalize_each_step = as_bool(v, k); }},
      {"record_stride",
       [](RunConfig& c, const json& v, const std::string& k) { c.record_stride = as_count(v, k); }},
      {"n_trajectories",
       [](RunConfig& c, const json& v, const std::string& k) { c.n_trajectories = as_count(v, k); }},
      {"master_seed", [](RunConfig& c, const json& v, const std::string& k) { c.master_seed = as_count(v, k); }},
      {"trajectory_index",
       [](RunConfig& c, const json& v, const std::string& k) { c.trajectory_index = as_count(v, k); }},
      {"draws", [](RunConfig& c, const json& v, const std::string& k) { c.draws = as_numbers(v, k); }},
      {"draw_convention",
       [](RunConfig& c, const json& v, const std::string& k) { c.draw_convention = as_string(v, k); }},
      {"stratified", [](RunConfig& c, const json& v, const std::string& k) { c.stratified = as_bool(v, k); }},
      {"checkpoints", [](RunConfig& c, const json& v, const std::string& k) { c.checkpoints = as_count(v, k); }},
      {"threads", [](RunConfig& c, const json& v, const std::string& k) { c.threads = as_small_count(v, k); }},
      {"sweep_axis", [](RunConfig& c, const json& v, const std::string& k) { c.sweep_axis = as_string(v, k); }},
      {"sweep_values",
       [](RunConfig& c, const json& v, const std::string& k) { c.sweep_values = as_numbers(v, k); }},
      {"sweep_dt", [](RunConfig& c, const json& v, const std::string& k) { c.sweep_dt = as_numbers(v, k); }},
      {"field_eta",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.field_eta = v.is_array() ? as_numbers(v, k) : std::vector<double>{as_number(v, k)};
       }},
      {"field_gamma",
       [](RunConfig& c, const json& v, const std::string& k) { c.field_gamma = as_small_count(v, k); }},
      {"field_grid_points",
       [](RunConfig& c, const json& v, const std::string& k) { c.field_grid_points = as_count(v, k); }},
      {"field_bins", [](RunConfig& c, const json& v, const std::string& k) { c.field_bins = as_count(v, k); }},
      {"field_samples",
       [](RunConfig& c, const json& v, const std::string& k) { c.field_samples = as_count(v, k); }},
      {"field_x", [](RunConfig& c, const json& v, const std::string& k) { c.field_x = as_number(v, k); }},
      {"out_dir", [](RunConfig& c, const json& v, const std::string& k) { c.out_dir = as_string(v, k); }},
      {"svg", [](RunConfig& c, const json& v, const std::string& k) { c.svg = as_bool(v, k); }},
  };
  return table;
}

std::size_t resolved_n(const RunConfig& c) {
  if (c.n_states != 0) return c.n_states;
  if (!c.initial_weights.empty()) return c.initial_weights.size();
  return c.model == "two_state" ? 2 : 0;
}

// Runs `check`, re-throwing any std::invalid_argument as a ConfigError for `field`.
template <typename F>
void attribute(const std::string& field, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

void require_finite(double v, const std::string& field) {
  if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
}

fs::path prepare_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) return "0";
  return fmt("%g", v);
}

// About `target` ticks on a 1-2-5 ladder covering [lo, hi].
std::vector<double> linear_ticks(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
  return ticks;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

// Hand-typed weights such as thirds are accepted and rescaled.
constexpr double kConfigWeightTolerance = 1e-9;

// Polylines are capped at this many vertices per series.
constexpr std::size_t kMaxVertices = 4000;

std::vector<std::vector<double>> deviation_rows(const EnsembleReport& r) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : r.deviation_series) rows.push_back({p.time, p.deviation});
  return rows;
}

PlotSeries deviation_series(const EnsembleReport& r, std::string label) {
  PlotSeries s{std::move(label), {}, {}};
  for (const auto& p : r.deviation_series) {
    s.x.push_back(p.time);
    s.y.push_back(p.deviation);
  }
  return s;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  RunConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown configuration key");
    it->second(c, value, key);
  }
  return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j;
  j["model"] = model;
  j["n_states"] = n_states;
  j["initial_weights"] = initial_weights.empty() ? json("uniform") : json(initial_weights);
  j["rate"] = rate;
  j["eta"] = eta;
  j["dt"] = dt;
  j["scheme"] = scheme;
  j["form"] = form;
  j["threshold"] = threshold;
  j["max_steps"] = max_steps;
  j["normalize_each_step"] = normalize_each_step;
  j["record_stride"] = record_stride;
  j["n_trajectories"] = n_trajectories;
  j["master_seed"] = master_seed;
  j["trajectory_index"] = trajectory_index;
  j["draws"] = draws;
  j["draw_convention"] = draw_convention;
  j["stratified"] = stratified;
  j["checkpoints"] = checkpoints;
  j["sweep_axis"] = sweep_axis;
  j["sweep_values"] = sweep_values;
  j["sweep_dt"] = sweep_dt;
  j["field_eta"] = field_eta;
  j["field_gamma"] = field_gamma;
  j["field_grid_points"] = field_grid_points;
  j["field_bins"] = field_bins;
  j["field_samples"] = field_samples;
  j["field_x"] = field_x;
  return j;
}

void RunConfig::validate() const {
  attribute("model", [&] { model_kind_from_string(model); });
  const std::size_t n = resolved_n(*this);
  if (n == 0) throw ConfigError("n_states", "required when initial_weights is \"uniform\"");
  if (!initial_weights.empty() && n != initial_weights.size()) {
    throw ConfigError("n_states", "is " + std::to_string(n) + " but initial_weights has " +
                                      std::to_string(initial_weights.size()) + " entries");
  }
  attribute("initial_weights", [&] { weights(); });
  require_finite(rate, "rate");
  if (!(rate > 0.0)) throw ConfigError("rate", "must be > 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta", "must lie in (0, 1]");
  attribute("n_states", [&] { model_spec().validate(); });
  require_finite(dt, "dt");
  if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
  attribute("scheme", [&] { scheme_from_string(scheme); });
  if (form != "auto") attribute("form", [&] { state_form_from_string(form); });
  if (!(threshold > 0.5 && threshold < 1.0)) throw ConfigError("threshold", "must lie in (0.5, 1)");
  if (max_steps == 0) throw ConfigError("max_steps", "must be >= 1");
  if (record_stride == 0) throw ConfigError("record_stride", "must be >= 1");
  attribute("form", [&] { resolve_form(model_spec(), integrator()); });

  if (n_trajectories == 0) throw ConfigError("n_trajectories", "must be >= 1");
  if (checkpoints < 2) throw ConfigError("checkpoints", "must be >= 2");
  if (draw_convention != "lambda" && draw_convention != "xi") {
    throw ConfigError("draw_convention", "must be \"lambda\" or \"xi\"");
  }
  if (!draws.empty()) {
    const auto spec = model_spec();
    if (draws.size() != spec.draw_count()) {
      throw ConfigError("draws", "model " + model + " takes " + std::to_string(spec.draw_count()) +
                                     " stochastic variables, got " + std::to_string(draws.size()));
    }
    const double lo = draw_convention == "lambda" ? 0.0 : -1.0;
    for (double d : draws) {
      if (!(d >= lo && d <= 1.0)) {
        throw ConfigError("draws", "values must lie in [" + tick_label(lo) + ", 1] for convention " +
                                       draw_convention);
      }
    }
  }
  if (stratified && model != "single_lambda") {
    throw ConfigError("stratified", "only available for the single_lambda model");
  }

  attribute("sweep_axis", [&] { sweep_axis_from_string(sweep_axis); });
  for (double v : sweep_values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("sweep_values", "values must be finite and > 0");
  }
  for (double v : sweep_dt) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("sweep_dt", "values must be finite and > 0");
  }
  if (!sweep_dt.empty() && sweep_dt.size() != sweep_values.size()) {
    throw ConfigError("sweep_dt", "must have one entry per sweep value");
  }
  if (!sweep_dt.empty() && sweep_axis != "eta") throw ConfigError("sweep_dt", "only used with sweep_axis \"eta\"");

  if (field_eta.empty()) throw ConfigError("field_eta", "must not be empty");
  for (double e : field_eta) attribute("field_eta", [&] { field_spec(e).validate(); });
  attribute("field_gamma", [&] { field_spec(field_eta.front()).validate(); });
  if (field_bins < 2) throw ConfigError("field_bins", "must be >= 2");
  if (field_samples == 0) throw ConfigError("field_samples", "must be >= 1");
  if (!(field_x >= 0.0 && field_x < 1.0)) throw ConfigError("field_x", "must lie in [0, 1)");
  if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
}

WeightVector RunConfig::weights() const {
  if (initial_weights.empty()) return WeightVector::uniform(resolved_n(*this));
  double sum = 0.0;
  for (double w : initial_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kConfigWeightTolerance) {
    throw std::invalid_argument("weights must sum to 1 (sum = " + format_number(sum) + ")");
  }
  return WeightVector::normalized(initial_weights);
}

ModelSpec RunConfig::model_spec() const {
  return ModelSpec{model_kind_from_string(model), rate, eta, resolved_n(*this)};
}

IntegratorConfig RunConfig::integrator() const {
  IntegratorConfig c;
  c.dt = dt;
  c.scheme = scheme_from_string(scheme);
  c.max_steps = max_steps;
  c.outcome_threshold = threshold;
  c.normalize_each_step = normalize_each_step;
  if (form != "auto") c.form = state_form_from_string(form);
  c.record_stride = record_stride;
  return c;
}

EnsembleOptions RunConfig::ensemble_options() const {
  EnsembleOptions o;
  o.stratified = stratified;
  o.threads = threads;
  o.checkpoints = checkpoints;
  return o;
}

FieldSpec RunConfig::field_spec(double field_eta_value) const {
  return FieldSpec{field_eta_value, field_gamma, field_grid_points};
}

json provenance(const RunConfig& cfg, const json& extra) {
  json j{{"config", cfg.to_json()}, {"master_seed", cfg.master_seed}};
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  return j;
}

std::string provenance_comment(const RunConfig& cfg, const json& extra) {
  return "# " + provenance(cfg, extra).dump();
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt("%.17g", v);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_csv(const fs::path& path, const std::string& provenance_line, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::string text = provenance_line + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
  text += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += format_number(row[i]);
    }
    text += "\n";
  }
  write_text(path, text);
}

std::string render_svg(const PlotSpec& plot, const std::string& metadata) {
  constexpr double width = 760, height = 480;
  constexpr double left = 78, right = 170, top = 44, bottom = 58;
  const double pw = width - left - right;
  const double ph = height - top - bottom;

  auto xmap = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_x && s.x[i] <= 0)) continue;
      x_lo = std::min(x_lo, xmap(s.x[i]));
      x_hi = std::max(x_hi, xmap(s.x[i]));
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (!std::isfinite(x_lo)) {
    x_lo = 0;
    x_hi = 1;
    y_lo = 0;
    y_hi = 1;
  }
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    const double pad = std::abs(y_lo) > 0 ? 0.1 * std::abs(y_lo) : 0.5;
    y_lo -= pad;
    y_hi += pad;
  } else {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }
  auto px = [&](double x) { return left + (xmap(x) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<desc>" << xml_escape(metadata) << "</desc>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(plot.title) << "</text>\n";

  o << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  std::ostringstream labels;
  const auto yt = linear_ticks(y_lo, y_hi, 6);
  for (double t : yt) {
    const double y = py(t);
    o << "<line x1=\"" << left << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << left + pw << "\" y2=\""
      << fmt("%.2f", y) << "\"/>\n";
    labels << "<text x=\"" << left - 6 << "\" y=\"" << fmt("%.2f", y + 4) << "\" text-anchor=\"end\">"
           << tick_label(t) << "</text>\n";
  }
  std::vector<double> xt;
  if (plot.log_x) {
    for (double d = std::ceil(x_lo - 1e-9); d <= x_hi + 1e-9; d += 1.0) xt.push_back(d);
    if (xt.size() < 2) xt = linear_ticks(x_lo, x_hi, 4);
  } else {
    xt = linear_ticks(x_lo, x_hi, 6);
  }
  for (double t : xt) {
    const double x = left + (t - x_lo) / (x_hi - x_lo) * pw;
    o << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << top << "\" x2=\"" << fmt("%.2f", x) << "\" y2=\""
      << top + ph << "\"/>\n";
    const std::string text = plot.log_x ? tick_label(std::pow(10.0, t)) : tick_label(t);
    labels << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
           << text << "</text>\n";
  }
  o << "</g>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << labels.str();
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 14 << "\" text-anchor=\"middle\">"
    << xml_escape(plot.x_label) << (plot.log_x ? " (log scale)" : "") << "</text>\n";
  o << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, (n + kMaxVertices - 1) / kMaxVertices);
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % stride != 0 && i + 1 != n) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_x && s.x[i] <= 0)) continue;
      o << (first ? "" : " ") << fmt("%.2f", px(s.x[i])) << ',' << fmt("%.2f", py(s.y[i]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 36 << "\" y2=\"" << ly
      << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

json report_to_json(const EnsembleReport& r) {
  json j;
  j["model"] = {{"kind", std::string(to_string(r.model.kind))},
                {"rate", r.model.rate},
                {"eta", r.model.eta},
                {"n_states", r.model.n_states}};
  j["initial_weights"] = std::vector<double>(r.initial.values().begin(), r.initial.values().end());
  j["integrator"] = {{"dt", r.config.dt},
                     {"scheme", std::string(to_string(r.config.scheme))},
                     {"form", std::string(to_string(resolve_form(r.model, r.config)))},
                     {"outcome_threshold", r.config.outcome_threshold},
                     {"max_steps", r.config.max_steps},
                     {"normalize_each_step", r.config.normalize_each_step}};
  j["master_seed"] = r.master_seed;
  j["stream_indices"] = {0, r.n_trajectories == 0 ? 0 : r.n_trajectories - 1};
  j["stratified"] = r.stratified;
  j["n_trajectories"] = r.n_trajectories;
  j["outcome_counts"] = r.outcome_counts;
  j["unresolved_count"] = r.unresolved_count;
  const auto resolved = r.n_trajectories - r.unresolved_count;
  std::vector<double> freq;
  for (auto c : r.outcome_counts) {
    freq.push_back(resolved ? static_cast<double>(c) / static_cast<double>(resolved) : NAN);
  }
  j["outcome_frequencies"] = freq;
  j["final_deviation"] = std::isfinite(r.final_deviation) ? json(r.final_deviation) : json(nullptr);
  j["standard_error"] = binomial_standard_error(r.initial, r.n_trajectories);
  j["max_halt_time"] = r.max_halt_time;
  std::vector<double> t, d;
  for (const auto& p : r.deviation_series) {
    t.push_back(p.time);
    d.push_back(p.deviation);
  }
  j["deviation_series"] = {{"time", t}, {"deviation", d}};
  return j;
}

std::vector<fs::path> cmd_trajectory(const RunConfig& cfg) {
  cfg.validate();
  const auto w = cfg.weights();
  const auto model = cfg.model_spec();
  const auto integ = cfg.integrator();
  const auto record =
      cfg.draws.empty()
          ? run_trajectory(w, model, integ, SeedSpec{cfg.master_seed, cfg.trajectory_index})
          : run_trajectory(w, model, integ,
                           StochasticDraw(cfg.draws, cfg.draw_convention == "lambda" ? DrawConvention::Lambda
                                                                                      : DrawConvention::Xi));
  const auto dir = prepare_dir(cfg);
  const std::size_t n = w.size();
  std::vector<std::string> header{"t"};
  for (std::size_t j = 0; j < n; ++j) header.push_back("w_" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < record.times.size(); ++k) {
    std::vector<double> row{record.times[k]};
    for (std::size_t j = 0; j < n; ++j) row.push_back(record.weights[k][j]);
    rows.push_back(std::move(row));
  }
  const json extra{{"stream_index", cfg.trajectory_index},
                   {"outcome", record.outcome ? json(*record.outcome) : json(nullptr)},
                   {"halt", std::string(to_string(record.halted_reason))}};
  std::vector<fs::path> files{dir / "trajectory.csv"};
  write_csv(files[0], provenance_comment(cfg, extra), header, rows);
  if (cfg.svg) {
    PlotSpec plot{"Born weights, " + cfg.model, "t", "weight", false, {}};
    for (std::size_t j = 0; j < n; ++j) {
      PlotSeries s{"w_" + std::to_string(j), record.times, {}};
      for (const auto& wv : record.weights) s.y.push_back(wv[j]);
      plot.series.push_back(std::move(s));
    }
    files.push_back(dir / "trajectory.svg");
    write_text(files.back(), render_svg(plot, provenance(cfg, extra).dump()));
  }
  return files;
}

std::vector<fs::path> cmd_ensemble(const RunConfig& cfg) {
  cfg.validate();
  const auto report =
      run_ensemble(cfg.weights(), cfg.model_spec(), cfg.integrator(), cfg.n_trajectories, cfg.master_seed,
                   cfg.ensemble_options());
  const auto dir = prepare_dir(cfg);
  json doc{{"provenance", provenance(cfg)}, {"report", report_to_json(report)}};
  std::vector<fs::path> files{dir / "ensemble.json", dir / "deviation.csv"};
  write_text(files[0], doc.dump(2) + "\n");
  write_csv(files[1], provenance_comment(cfg), {"t", "deviation"}, deviation_rows(report));
  if (cfg.svg) {
    PlotSpec plot{"Deviation from Born weights, " + cfg.model, "t", "L1 deviation", true,
                  {deviation_series(report, "n = " + std::to_string(cfg.n_trajectories))}};
    files.push_back(dir / "deviation.svg");
    write_text(files.back(), render_svg(plot, provenance(cfg).dump()));
  }
  return files;
}

std::vector<fs::path> cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.sweep_values.empty()) throw ConfigError("sweep_values", "required by the sweep command");
  const auto axis = sweep_axis_from_string(cfg.sweep_axis);
  SweepTable table;
  attribute("sweep_values", [&] {
    table = sweep(cfg.weights(), cfg.model_spec(), cfg.integrator(), axis, cfg.sweep_values, cfg.n_trajectories,
                  cfg.master_seed, cfg.ensemble_options(), cfg.sweep_dt);
  });
  const auto dir = prepare_dir(cfg);
  std::vector<std::vector<double>> rows;
  for (const auto& p : table.points) rows.push_back({p.value, p.deviation, p.standard_error});
  std::vector<fs::path> files{dir / "sweep.csv"};
  write_csv(files[0], provenance_comment(cfg), {"param", "deviation", "stderr"}, rows);
  PlotSpec plot{"Deviation from Born weights, " + cfg.model + " " + cfg.sweep_axis + " sweep", "t",
                "L1 deviation", true, {}};
  for (std::size_t k = 0; k < table.points.size(); ++k) {
    const auto& p = table.points[k];
    const json extra{{"sweep_point", k}, {"param", p.value}, {"dt", p.report.config.dt}};
    files.push_back(dir / ("deviation_" + std::to_string(k) + ".csv"));
    write_csv(files.back(), provenance_comment(cfg, extra), {"t", "deviation"}, deviation_rows(p.report));
    plot.series.push_back(deviation_series(p.report, cfg.sweep_axis + " = " + tick_label(p.value)));
  }
  if (cfg.svg) {
    files.push_back(dir / "sweep.svg");
    write_text(files.back(), render_svg(plot, provenance(cfg).dump()));
  }
  return files;
}

std::vector<fs::path> cmd_field_pdf(const RunConfig& cfg) {
  cfg.validate();
  std::vector<Histogram> hists;
  for (double e : cfg.field_eta) {
    hists.push_back(field_pdf_histogram(cfg.field_spec(e), cfg.field_x, cfg.field_samples, cfg.field_bins,
                                        SeedSpec{cfg.master_seed, 0}));
  }
  const auto dir = prepare_dir(cfg);
  std::vector<fs::path> files;
  PlotSpec plot{"Distribution of the random field", "field value", "density", false, {}};
  for (std::size_t k = 0; k < hists.size(); ++k) {
    const auto centres = hists[k].centres();
    const auto density = hists[k].density();
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < centres.size(); ++b) rows.push_back({centres[b], density[b]});
    const std::string name = k == 0 ? "field_pdf.csv" : "field_pdf_" + std::to_string(k) + ".csv";
    files.push_back(dir / name);
    write_csv(files.back(), provenance_comment(cfg, json{{"field_eta", cfg.field_eta[k]}}),
              {"bin_center", "density"}, rows);
    plot.series.push_back({"eta = " + tick_label(cfg.field_eta[k]), centres, density});
  }
  if (cfg.svg) {
    files.push_back(dir / "field_pdf.svg");
    write_text(files.back(), render_svg(plot, provenance(cfg).dump()));
  }
  return files;
}

}  // namespace dqsr
