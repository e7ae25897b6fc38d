#include "meb/channel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "meb/csv.hpp"

namespace meb {

double LinkConfig::coupling() const {
  const double ratio = d0 / distance;
  return k0 * ratio * ratio * ratio;
}

double LinkConfig::lsb() const { return adc_range / std::ldexp(1.0, adc_bits); }

std::int32_t LinkConfig::max_code() const {
  return static_cast<std::int32_t>((std::int64_t{1} << (adc_bits - 1)) - 1);
}

void LinkConfig::validate(double f_carrier) const {
  if (!(distance > 0.0)) fail(ErrorKind::config, "link: distance must be positive");
  if (!(d0 > 0.0)) fail(ErrorKind::config, "link: d0 must be positive");
  if (adc_bits < 1 || adc_bits > 24) fail(ErrorKind::config, "link: adc_bits must be in 1..24");
  if (!(adc_range > 0.0)) fail(ErrorKind::config, "link: adc_range must be positive");
  if (!(noise_rms >= 0.0)) fail(ErrorKind::config, "link: noise_rms must be >= 0");
  if (!(adc_fs > 2.0 * f_carrier)) fail(ErrorKind::config, "link: adc_fs must exceed 2 f_carrier");
}

Waveform backscatter_signal(std::span<const double> time, std::span<const double> i_branch0,
                            const LinkConfig& cfg) {
  if (time.size() != i_branch0.size()) fail(ErrorKind::input, "backscatter: length mismatch");
  const double g = cfg.coupling();
  Waveform w;
  w.time.assign(time.begin(), time.end());
  w.value.resize(i_branch0.size());
  std::transform(i_branch0.begin(), i_branch0.end(), w.value.begin(),
                 [g](double i) { return g * i; });
  return w;
}

std::vector<double> resample(const Waveform& w, double fs, double t0) {
  std::vector<double> out;
  if (w.time.size() < 2 || !(fs > 0.0)) return out;
  std::size_t j = 0;
  for (std::size_t n = 0;; ++n) {
    const double t = t0 + static_cast<double>(n) / fs;
    if (t > w.time.back()) break;
    if (t < w.time.front()) {
      out.push_back(w.value.front());
      continue;
    }
    while (j + 2 < w.time.size() && w.time[j + 1] < t) ++j;
    const double span = w.time[j + 1] - w.time[j];
    const double frac = span > 0.0 ? (t - w.time[j]) / span : 0.0;
    out.push_back(w.value[j] + frac * (w.value[j + 1] - w.value[j]));
  }
  return out;
}

RxCapture digitize(std::span<const double> volts, const LinkConfig& cfg, std::mt19937_64& rng,
                   std::size_t trigger_index) {
  RxCapture cap;
  cap.fs = cfg.adc_fs;
  cap.trigger_index = trigger_index;
  cap.samples.resize(volts.size());
  const double inv_lsb = 1.0 / cfg.lsb();
  const double limit = cfg.max_code();
  std::normal_distribution<double> noise(0.0, cfg.noise_rms > 0.0 ? cfg.noise_rms : 1.0);
  for (std::size_t n = 0; n < volts.size(); ++n) {
    double v = volts[n];
    if (cfg.noise_rms > 0.0) v += noise(rng);
    double code = std::nearbyint(v * cfg.rx_gain * inv_lsb);
    if (code > limit || code < -limit) {
      code = std::clamp(code, -limit, limit);
      ++cap.saturated;
    }
    cap.samples[n] = static_cast<std::int32_t>(code);
  }
  return cap;
}

RxCapture receive(const Waveform& waveform, const LinkConfig& cfg, double t_trigger) {
  cfg.validate();
  if (waveform.time.empty()) fail(ErrorKind::input, "receive: empty waveform");
  const double t0 = waveform.time.front();
  const auto volts = resample(waveform, cfg.adc_fs, t0);
  const double trig = std::ceil((t_trigger - t0) * cfg.adc_fs - 1e-9);
  std::mt19937_64 rng(cfg.seed);
  return digitize(volts, cfg, rng, trig > 0.0 ? static_cast<std::size_t>(trig) : 0);
}

double measure_snr(double drop_amplitude, double noise_rms) {
  if (!(drop_amplitude > 0.0) || !(noise_rms > 0.0)) {
    fail(ErrorKind::domain, "snr: drop amplitude and noise must be positive");
  }
  return 20.0 * std::log10(drop_amplitude / noise_rms);
}

namespace {

std::string sidecar_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

}  // namespace

void write_capture(const std::string& csv_path, const RxCapture& capture, const LinkConfig* cfg) {
  CsvWriter w(csv_path, {"index", "code"});
  for (std::size_t i = 0; i < capture.samples.size(); ++i) {
    w.row({static_cast<double>(i), static_cast<double>(capture.samples[i])});
  }
  w.commit();
  nlohmann::json j;
  j["fs_hz"] = capture.fs;
  j["trigger_index"] = capture.trigger_index;
  j["saturated"] = capture.saturated;
  if (cfg) {
    j["distance_m"] = cfg->distance;
    j["k0"] = cfg->k0;
    j["d0_m"] = cfg->d0;
    j["noise_rms_v"] = cfg->noise_rms;
    j["rx_gain"] = cfg->rx_gain;
    j["adc_bits"] = cfg->adc_bits;
    j["adc_range_v"] = cfg->adc_range;
    j["seed"] = cfg->seed;
  }
  write_text_file_atomic(sidecar_path(csv_path), j.dump(2) + "\n");
}

RxCapture read_capture(const std::string& csv_path) {
  const auto rows = read_csv(csv_path, {"index", "code"});
  RxCapture cap;
  cap.samples.reserve(rows.size());
  for (const auto& r : rows) cap.samples.push_back(static_cast<std::int32_t>(r[1]));
  try {
    const auto j = nlohmann::json::parse(read_text_file(sidecar_path(csv_path)));
    cap.fs = j.at("fs_hz").get<double>();
    cap.trigger_index = j.at("trigger_index").get<std::size_t>();
    cap.saturated = j.value("saturated", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, csv_path + ": bad capture sidecar: " + e.what());
  }
  return cap;
}

}  // namespace meb
