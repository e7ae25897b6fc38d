#pragma once

// Backscatter channel: branch-0 (vibration) current to received voltage with
// a 1/d^3 near-field law, then AWGN, receiver gain and a saturating ADC.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meb/error.hpp"

namespace meb {

struct LinkConfig {
  double distance = 0.01;   // m
  double k0 = 1.0;          // V/A at d0
  double d0 = 0.01;         // m
  double noise_rms = 0.0;   // V at the receiver input
  double rx_gain = 1.0;
  int adc_bits = 12;
  double adc_fs = 2e6;      // Hz
  double adc_range = 2.0;   // V, full scale (+-range/2)
  std::uint64_t seed = 1;

  double coupling() const;  // k0 * (d0/d)^3
  double lsb() const;
  std::int32_t max_code() const;
  void validate(double f_carrier = 0.0) const;
};

struct Waveform {
  std::vector<double> time;
  std::vector<double> value;
};

struct RxCapture {
  double fs = 0.0;
  std::vector<std::int32_t> samples;
  std::size_t trigger_index = 0;  // first sample of the ringdown
  std::size_t saturated = 0;      // samples clipped by the ADC
};

Waveform backscatter_signal(std::span<const double> time, std::span<const double> i_branch0,
                            const LinkConfig& cfg);

// Uniform samples of a piecewise-linear waveform at t0 + n/fs, n = 0.. while
// inside the waveform.
std::vector<double> resample(const Waveform& w, double fs, double t0);

// Noise (seeded generator), gain and quantization of samples already at the
// ADC rate. `rng` is advanced by one normal draw per sample when noise > 0.
RxCapture digitize(std::span<const double> volts, const LinkConfig& cfg, std::mt19937_64& rng,
                   std::size_t trigger_index = 0);

// resample + digitize with a generator seeded from cfg.seed.
RxCapture receive(const Waveform& waveform, const LinkConfig& cfg, double t_trigger);

double measure_snr(double drop_amplitude, double noise_rms);

// Capture CSV `index,code` plus sidecar JSON {fs_hz, trigger_index, ...}.
void write_capture(const std::string& csv_path, const RxCapture& capture,
                   const LinkConfig* cfg = nullptr);
RxCapture read_capture(const std::string& csv_path);

}  // namespace meb
