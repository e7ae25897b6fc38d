#pragma once

// Recording back end: LFP quantization, CIC decimation, first-order DPCM,
// the FIFO in front of the uplink, and receiver-side reconstruction.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meb/ber.hpp"

namespace meb {

struct CicConfig {
  int stages = 3;
  int decimation = 8;

  void validate() const;
  std::int64_t dc_gain() const;  // decimation^stages
};

// Integrators (wrapping 64-bit), decimation, combs, then division by the DC
// gain rounded to nearest (ties toward +inf). Output n is taken at input
// index n*R + R - 1; zero initial state.
std::vector<std::int32_t> cic_decimate(std::span<const std::int32_t> input, const CicConfig& cfg = {});

struct DeltaStream {
  std::int16_t initial = 0;
  std::vector<std::int8_t> residuals;  // one per sample, residuals[0] = 0
  std::size_t overload_count = 0;      // clamped residuals
};

DeltaStream delta_encode(std::span<const std::int32_t> samples);
std::vector<std::int32_t> delta_decode(const DeltaStream& stream);

// 16-bit initial value then 8-bit residuals, MSB first.
std::vector<std::uint8_t> delta_to_bits(const DeltaStream& stream);
DeltaStream delta_from_bits(std::span<const std::uint8_t> bits, std::size_t n_samples);

struct FifoStats {
  std::size_t max_occupancy = 0;  // symbols
  std::size_t overflow = 0;       // symbols dropped on a full FIFO
  std::size_t produced = 0;
  std::size_t served = 0;
};

// Producer: sample_bits per sample at sample_rate, grouped into symbol_bits
// symbols. Consumer: one symbol per frame at symbol_rate. Runs until the
// producer has emitted n_samples.
FifoStats simulate_fifo(std::size_t n_samples, double sample_rate, int sample_bits, int symbol_bits,
                        double symbol_rate, std::size_t depth);

struct LfpFrontEnd {
  double lna_gain = 15.0;
  int adc_bits = 16;
  double adc_full_scale = 2.4;  // V peak-to-peak after the LNA
  double input_fs = 16000.0;

  double lsb() const;
  void validate() const;
};

std::vector<std::int32_t> quantize_lfp(std::span<const double> volts, const LfpFrontEnd& fe);

struct StreamConfig {
  LfpFrontEnd front_end;
  CicConfig cic;
  std::size_t fifo_depth = 64;
  LinkConfig link;
  Decoder decoder = Decoder::drop;
  DropDetectConfig drop;
  const QuantizedMlp* mlp = nullptr;
  std::uint64_t seed = 1;
};

struct StreamReport {
  std::vector<double> time;           // reconstruction sample times
  std::vector<std::int32_t> cic_out;  // reference decimated codes
  std::vector<std::int32_t> reconstructed;
  std::size_t bits = 0;
  std::size_t bit_errors = 0;
  double ber = 0.0;
  std::size_t overload_count = 0;
  FifoStats fifo;
  bool bit_exact = false;
  double source_bit_rate = 0.0;
  double link_bit_rate = 0.0;

  double volts_per_code = 0.0;
};

StreamReport stream_pipeline(std::span<const double> time, std::span<const double> volts,
                             const LinkSimulator& sim, const StreamConfig& cfg);

// LFP CSV: `time_s,volts`.
void read_lfp_csv(const std::string& path, std::vector<double>& time, std::vector<double>& volts);
void write_lfp_csv(const std::string& path, std::span<const double> time, std::span<const double> volts);
std::string stream_report_json(const StreamReport& r, std::uint64_t seed);

}  // namespace meb
