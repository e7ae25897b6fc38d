#include "meb/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <set>

#include "meb/csv.hpp"

namespace meb {

namespace {

using nlohmann::json;

// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::config, path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::config, path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  void get_opt(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_ + "." + key);
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(ErrorKind::config, path_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::uint64_t ExperimentConfig::require_seed(std::optional<std::uint64_t> override_seed) const {
  if (override_seed) return *override_seed;
  if (seed) return *seed;
  fail(ErrorKind::config, "a seed is required (--seed or config \"seed\")");
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "config");
  std::optional<std::string> model;
  root.get_opt("model", model);
  if (model) {
    const std::filesystem::path p(*model);
    c.model_path = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
  }
  root.get("model_order", c.model_order);
  root.get_opt("seed", c.seed);
  root.get("output_dir", c.output_dir);

  if (auto s = root.sub("frame")) {
    auto& f = c.setup.fmt;
    s->get("excitation_cycles", f.excitation_cycles);
    s->get("ringdown_cycles", f.ringdown_cycles);
    s->get("symbol_bits", f.symbol_bits);
    s->get("cycle_spacing", f.cycle_spacing);
    s->get("base_cycle", f.base_cycle);
    s->get("scee_cycles", f.scee_cycles);
    s->finish();
  }
  if (auto s = root.sub("scee")) {
    s->get("n_fly", c.setup.bank.n_fly);
    s->get("c_fly_total_farad", c.setup.bank.c_fly_total);
    s->finish();
  }
  if (auto s = root.sub("timing")) {
    s->get("t_delay_s", c.setup.t_delay);
    s->get("zcd_base_delay_s", c.setup.zcd.base_delay);
    s->get("zcd_adaptive_coeff", c.setup.zcd.adaptive_coeff);
    s->get("incremental_three_quarter", c.setup.dps.incremental_three_quarter);
    s->get("thermometer_offset", c.setup.dps.thermometer_offset);
    s->finish();
    c.setup.zcd.t_delay_step = c.setup.t_delay;
  }
  if (auto s = root.sub("drive")) {
    s->get("amplitude", c.setup.drive_amplitude);
    s->get("dt_s", c.setup.dt);
    s->finish();
  }
  if (auto s = root.sub("link")) {
    auto& l = c.link;
    s->get("distance_m", l.distance);
    s->get("k0_v_per_a", l.k0);
    s->get("d0_m", l.d0);
    s->get("noise_rms_v", l.noise_rms);
    if (const auto* g = s->raw("rx_gain")) {
      if (g->is_string() && g->get<std::string>() == "auto") {
        c.link_auto_gain = true;
      } else if (g->is_number()) {
        c.link_auto_gain = false;
        l.rx_gain = g->get<double>();
      } else {
        fail(ErrorKind::config, "config.link.rx_gain: number or \"auto\"");
      }
    }
    s->get("adc_bits", l.adc_bits);
    s->get("adc_fs_hz", l.adc_fs);
    s->get("adc_range_v", l.adc_range);
    s->finish();
    c.setup.adc_fs = l.adc_fs;
  }
  if (auto s = root.sub("drop")) {
    s->get("gamma", c.drop.gamma);
    std::string mode = "relative";
    s->get("mode", mode);
    if (mode == "relative") {
      c.drop.mode = ThresholdMode::relative;
    } else if (mode == "decay_curve") {
      c.drop.mode = ThresholdMode::decay_curve;
    } else {
      fail(ErrorKind::config, "config.drop.mode: relative or decay_curve");
    }
    s->get("q_hat", c.drop.q_hat);
    s->get("lag", c.drop.lag);
    s->finish();
  }
  if (auto s = root.sub("sweep")) {
    s->get("distances_m", c.sweep.distances);
    s->get_opt("snr_db", c.sweep.snr_db);
    s->get("snr_ref_distance_m", c.sweep.snr_ref_distance);
    s->get("noise_rms_v", c.sweep.noise_grid);
    s->get("auto_gain", c.sweep.auto_gain);
    s->finish();
  }
  if (auto s = root.sub("mlp")) {
    s->get("dims", c.mlp.dims);
    s->get("epochs", c.mlp.epochs);
    s->get("batch", c.mlp.batch);
    s->get("learning_rate", c.mlp.learning_rate);
    s->get("momentum", c.mlp.momentum);
    s->get("calib_percentile", c.mlp.calib_percentile);
    s->get("dataset_per_class", c.dataset_per_class);
    s->finish();
  }
  if (auto s = root.sub("recording")) {
    s->get("lna_gain", c.lfp.lna_gain);
    s->get("adc_bits", c.lfp.adc_bits);
    s->get("adc_full_scale_v", c.lfp.adc_full_scale);
    s->get("input_fs_hz", c.lfp.input_fs);
    s->get("cic_stages", c.cic.stages);
    s->get("cic_decimation", c.cic.decimation);
    s->get("fifo_depth", c.fifo_depth);
    s->finish();
  }
  root.finish();

  if (c.model_path) {
    if (!std::filesystem::exists(*c.model_path)) fail(ErrorKind::config, "config.model: no such file " + *c.model_path);
    c.setup.model = read_model_json(*c.model_path);
  } else {
    if (c.model_order != 1 && c.model_order != 3) fail(ErrorKind::config, "config.model_order: 1 or 3");
    c.setup.model = reference_model(static_cast<std::size_t>(c.model_order));
  }
  c.setup.fmt.validate();
  c.mlp.validate();
  c.lfp.validate();
  c.cic.validate();
  if (c.fifo_depth < 1) fail(ErrorKind::config, "config.recording.fifo_depth must be >= 1");
  if (c.sweep.distances.empty() && c.sweep.noise_grid.empty()) {
    fail(ErrorKind::config, "config.sweep: no conditions");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(read_text_file(path), base.empty() ? "." : base);
}

LinkConfig effective_link(const LinkSimulator& sim, const ExperimentConfig& cfg) {
  cfg.link.validate(sim.carrier_frequency());
  return cfg.link_auto_gain ? sim.with_auto_gain(cfg.link) : cfg.link;
}

std::vector<BerCondition> sweep_conditions(const LinkSimulator& sim, const ExperimentConfig& cfg) {
  std::vector<BerCondition> out;
  if (!cfg.sweep.noise_grid.empty()) {
    for (double n : cfg.sweep.noise_grid) {
      LinkConfig l = cfg.link;
      l.noise_rms = n;
      if (cfg.sweep.auto_gain) l = sim.with_auto_gain(l);
      char label[48];
      std::snprintf(label, sizeof label, "noise=%gV", n);
      out.push_back({label, l});
    }
    return out;
  }
  out = distance_conditions(sim, cfg.link, cfg.sweep.distances, cfg.sweep.snr_db, cfg.sweep.snr_ref_distance);
  if (!cfg.sweep.auto_gain) {
    for (auto& c : out) c.link.rx_gain = cfg.link.rx_gain;
  }
  return out;
}

}  // namespace meb
