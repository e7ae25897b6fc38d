#include "meb/link.hpp"

#include <algorithm>
#include <cmath>

namespace meb {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ index);
}

std::vector<double> envelope_real(std::span<const double> x, std::size_t start,
                                  double carrier_period_samples) {
  std::vector<double> env;
  for (std::size_t cycle = 0;; ++cycle) {
    const auto lo = start + static_cast<std::size_t>(std::llround(cycle * carrier_period_samples));
    const auto hi = start + static_cast<std::size_t>(std::llround((cycle + 1) * carrier_period_samples));
    if (hi > x.size()) break;
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(x[i]));
    env.push_back(m);
  }
  return env;
}

LinkSimulator::LinkSimulator(LinkSetup setup) : setup_(std::move(setup)) {
  setup_.fmt.validate();
  if (!(setup_.t_delay > 0.0)) fail(ErrorKind::config, "link: t_delay must be positive");
  if (!(setup_.drive_amplitude > 0.0)) fail(ErrorKind::config, "link: drive amplitude must be positive");
  f_carrier_ = ringdown_frequency(setup_.model);
  if (!(setup_.adc_fs > 2.0 * f_carrier_)) fail(ErrorKind::config, "link: adc_fs must exceed 2 f_carrier");
  dt_ = setup_.dt > 0.0 ? setup_.dt : default_step(setup_.model);

  // Unmodulated frame: source of the zero crossings and of the TDC code.
  const Circuit circuit{setup_.model, setup_.bank.capacitances()};
  const DriveConfig drive{setup_.drive_amplitude, f_carrier_, 0.0, ringdown_start()};
  RunOptions opt;
  opt.dt = dt_;
  opt.t_end = frame_duration();
  opt.probes = {"v_cp"};
  base_trace_ = run(circuit, drive, {}, opt);

  const double t_rd = ringdown_start();
  const double z0 = detect_zero_crossing(base_trace_, t_rd, setup_.zcd, 0);
  const double z1 = detect_zero_crossing(base_trace_, z0 + 0.5 * carrier_period(), setup_.zcd, 1);
  tdc_ = tdc_encode(z1 - z0, setup_.t_delay);

  trigger_index_ = static_cast<std::size_t>(std::ceil(t_rd * setup_.adc_fs - 1e-9));
  current_.resize(static_cast<std::size_t>(setup_.fmt.code_count()));
  fine_envelope_.resize(current_.size());
  const double steps_per_cycle = carrier_period() / dt_;
  const auto rd_step = static_cast<std::size_t>(std::llround(t_rd / dt_));
  for (int code = 0; code < setup_.fmt.code_count(); ++code) {
    const auto sim = simulate_frame(code, {"i_l0"});
    const auto i0 = sim.trace.column("i_l0");
    const Waveform w{sim.trace.time, std::vector<double>(i0.begin(), i0.end())};
    current_[static_cast<std::size_t>(code)] = resample(w, setup_.adc_fs, 0.0);
    fine_envelope_[static_cast<std::size_t>(code)] = envelope_real(i0, rd_step, steps_per_cycle);
  }
  std::size_t n = current_[0].size();
  for (const auto& c : current_) n = std::min(n, c.size());
  for (auto& c : current_) c.resize(n);
  if (trigger_index_ >= n) fail(ErrorKind::config, "link: ringdown starts after the last sample");
}

double LinkSimulator::ringdown_start() const noexcept {
  return setup_.fmt.excitation_cycles / f_carrier_;
}

double LinkSimulator::frame_duration() const noexcept {
  return setup_.fmt.frame_cycles() / f_carrier_;
}

FrameSimulation LinkSimulator::plan_frame(int code) const {
  FrameSimulation f;
  f.code = code;
  f.trigger_cycle = encode_symbol(code, setup_.fmt);
  if (!f.trigger_cycle) return f;
  // The peak detector counts rising crossings from the start of the ringdown.
  double t = ringdown_start();
  for (int j = 0; j <= *f.trigger_cycle; ++j) {
    f.zc_time = detect_zero_crossing(base_trace_, t, setup_.zcd, j);
    t = f.zc_time + 0.5 * carrier_period();
  }
  f.pulses = en_scee_pulses(f.zc_time, tdc_, setup_.t_delay, setup_.fmt.scee_cycles, setup_.dps);
  std::vector<int> pols(f.pulses.size());
  for (std::size_t i = 0; i < pols.size(); ++i) pols[i] = i % 2 == 0 ? +1 : -1;
  f.schedule = build_scee_schedule(setup_.bank, f.pulses, pols);
  return f;
}

FrameSimulation LinkSimulator::simulate_frame(int code, std::vector<std::string> probes) const {
  auto f = plan_frame(code);
  const Circuit circuit{setup_.model, setup_.bank.capacitances()};
  const DriveConfig drive{setup_.drive_amplitude, f_carrier_, 0.0, ringdown_start()};
  RunOptions opt;
  opt.dt = dt_;
  opt.t_end = frame_duration();
  opt.probes = std::move(probes);
  f.trace = run(circuit, drive, f.schedule.events, opt);
  return f;
}

const std::vector<double>& LinkSimulator::frame_current(int code) const {
  if (code < 0 || code >= setup_.fmt.code_count()) {
    fail(ErrorKind::input, "link: code " + std::to_string(code) + " out of range");
  }
  return current_[static_cast<std::size_t>(code)];
}

std::vector<double> LinkSimulator::received_volts(int code, const LinkConfig& cfg) const {
  const auto& i0 = frame_current(code);
  const double g = cfg.coupling();
  std::vector<double> v(i0.size());
  std::transform(i0.begin(), i0.end(), v.begin(), [g](double x) { return g * x; });
  return v;
}

RxCapture LinkSimulator::capture(int code, const LinkConfig& cfg, std::mt19937_64& rng) const {
  cfg.validate(f_carrier_);
  if (std::abs(cfg.adc_fs - setup_.adc_fs) > 1e-9 * setup_.adc_fs) {
    fail(ErrorKind::config, "link: adc_fs differs from the simulator sampling rate");
  }
  return digitize(received_volts(code, cfg), cfg, rng, trigger_index_);
}

double LinkSimulator::drop_amplitude(int code, const LinkConfig& cfg) const {
  const auto c = encode_symbol(code, setup_.fmt);
  if (!c) return 0.0;
  const auto& env = fine_envelope_[static_cast<std::size_t>(code)];
  const auto before = static_cast<std::size_t>(*c - 1);
  const auto after = static_cast<std::size_t>(*c + setup_.fmt.scee_cycles);
  if (*c < 1 || after >= env.size()) fail(ErrorKind::config, "link: drop window outside the ringdown");
  return cfg.coupling() * (env[before] - env[after]);
}

LinkConfig LinkSimulator::with_auto_gain(LinkConfig cfg, double fill) const {
  double peak = 0.0;
  for (int code = 0; code < setup_.fmt.code_count(); ++code) {
    for (double v : received_volts(code, cfg)) peak = std::max(peak, std::abs(v));
  }
  if (!(peak > 0.0)) fail(ErrorKind::config, "link: silent frame, cannot set gain");
  cfg.rx_gain = fill * cfg.max_code() * cfg.lsb() / peak;
  return cfg;
}

double LinkSimulator::noise_for_snr(const LinkConfig& cfg, double snr_db, int ref_code) const {
  const double drop = drop_amplitude(ref_code, cfg);
  if (!(drop > 0.0)) fail(ErrorKind::config, "link: reference code has no drop");
  return drop / std::pow(10.0, snr_db / 20.0);
}

}  // namespace meb
