#pragma once

// End-to-end frame synthesis: excitation, ringdown, peak-detector timing and
// SCEE for one PWM symbol, then the receive chain.

#include <array>
#include <optional>
#include <random>
#include <vector>

#include "meb/channel.hpp"
#include "meb/scee.hpp"
#include "meb/timing.hpp"
#include "meb/transient.hpp"
#include "meb/uplink.hpp"

namespace meb {

struct LinkSetup {
  TransducerModel model = reference_model(3);
  SceeBank bank;
  FrameFormat fmt;
  ZcdConfig zcd;
  double t_delay = 15e-9;
  DpsOptions dps;
  double drive_amplitude = 1.0;
  double dt = 0.0;        // 0 selects default_step(model)
  double adc_fs = 2e6;    // sampling rate of the cached frame currents
};

struct FrameSimulation {
  int code = 0;
  std::optional<int> trigger_cycle;
  double zc_time = 0.0;  // zero crossing that starts the pulse train (valid with trigger)
  std::vector<double> pulses;
  SceeSchedule schedule;
  WaveformTrace trace;
};

// Seeds derived from (seed, stream, index) with splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

class LinkSimulator {
 public:
  explicit LinkSimulator(LinkSetup setup);

  const LinkSetup& setup() const noexcept { return setup_; }
  double carrier_frequency() const noexcept { return f_carrier_; }
  double carrier_period() const noexcept { return 1.0 / f_carrier_; }
  double ringdown_start() const noexcept;
  double frame_duration() const noexcept;
  // Carrier period measured by the TDC on an unmodulated ringdown.
  const TdcCode& tdc_code() const noexcept { return tdc_; }

  // Full-resolution simulation of one frame. Probes as in RunOptions.
  FrameSimulation simulate_frame(int code,
                                 std::vector<std::string> probes = {"v_cp", "i_l0"}) const;

  // Noiseless branch-0 current of each code at the ADC instants n / adc_fs.
  const std::vector<double>& frame_current(int code) const;
  std::size_t frame_samples() const noexcept { return current_[0].size(); }
  std::size_t trigger_index() const noexcept { return trigger_index_; }
  double period_samples() const noexcept { return setup_.adc_fs / f_carrier_; }

  // Received capture of one frame; rng supplies the noise draws.
  RxCapture capture(int code, const LinkConfig& cfg, std::mt19937_64& rng) const;
  // Receiver-input voltage before noise and gain.
  std::vector<double> received_volts(int code, const LinkConfig& cfg) const;

  // Noiseless envelope drop across the extraction, in receiver-input volts:
  // envelope of the cycle before the trigger minus the envelope scee_cycles
  // after it, taken from the full-resolution current. 0 for code 0.
  double drop_amplitude(int code, const LinkConfig& cfg) const;
  // rx_gain placing the largest noiseless sample at `fill` of full scale.
  LinkConfig with_auto_gain(LinkConfig cfg, double fill = 0.8) const;
  // noise_rms giving `snr_db` for the drop of `ref_code` at cfg.distance.
  double noise_for_snr(const LinkConfig& cfg, double snr_db, int ref_code) const;

 private:
  FrameSimulation plan_frame(int code) const;

  LinkSetup setup_;
  double f_carrier_ = 0.0;
  double dt_ = 0.0;
  WaveformTrace base_trace_;  // unmodulated frame, v_cp only
  TdcCode tdc_;
  std::size_t trigger_index_ = 0;
  std::vector<std::vector<double>> current_;
  std::vector<std::vector<double>> fine_envelope_;  // per ringdown cycle, amperes
};

// Per-cycle max |x| on a real-valued sample stream, windows as in envelope().
std::vector<double> envelope_real(std::span<const double> x, std::size_t start,
                                  double carrier_period_samples);

}  // namespace meb
