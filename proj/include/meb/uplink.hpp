#pragma once

// PWM backscatter framing: each symbol is the ringdown cycle at which the
// energy extraction starts (or no extraction for code 0), and the matching
// drop-detection demodulator.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "meb/channel.hpp"

namespace meb {

struct FrameFormat {
  int excitation_cycles = 24;
  int ringdown_cycles = 32;
  int symbol_bits = 3;
  int cycle_spacing = 3;
  int base_cycle = 3;
  int scee_cycles = 4;

  int code_count() const noexcept { return 1 << symbol_bits; }
  int frame_cycles() const noexcept { return excitation_cycles + ringdown_cycles; }
  double bit_rate(double f_carrier) const;
  void validate() const;
};

// Ringdown cycle at which extraction starts; nullopt for code 0.
std::optional<int> encode_symbol(int code, const FrameFormat& fmt);

struct SymbolStream {
  std::vector<int> symbols;
  int padding_bits = 0;
};

// MSB-first packing of bits (0/1 bytes) into symbol_bits-wide symbols.
SymbolStream frame_stream(std::span<const std::uint8_t> bits, const FrameFormat& fmt);
std::vector<std::uint8_t> unframe_stream(const SymbolStream& stream, const FrameFormat& fmt);
// Big-endian bit expansion of bytes.
std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes);

// Maximum |code| in each carrier cycle after the trigger, indexed by ringdown
// cycle. The cycle length may be fractional (samples per carrier period).
std::vector<std::int32_t> envelope(const RxCapture& capture, double carrier_period_samples);

enum class ThresholdMode {
  relative,     // delta > gamma * env[n-1]
  decay_curve,  // delta > gamma * env[0] * exp(-n pi / q_hat)
};

struct DropDetectConfig {
  double gamma = 0.25;
  ThresholdMode mode = ThresholdMode::relative;
  double q_hat = 150.0;
  // Expected envelope cycles between the trigger and the flagged drop. The
  // first extraction cycle removes less than gamma on high-order models, so
  // the flag lands one or two cycles after the trigger.
  double lag = 1.5;
};

struct DropDecision {
  int code = 0;
  std::optional<int> flagged_cycle;
  bool decode_error = false;  // flagged cycle is off the code lattice
};

DropDecision demod_drop(const RxCapture& capture, const FrameFormat& fmt,
                        const DropDetectConfig& cfg, double carrier_period_samples);

int bit_errors(int sent, int received, int symbol_bits);

}  // namespace meb
