#include "meb/uplink.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "meb/kernels.hpp"
#include "meb/transducer.hpp"

namespace meb {

double FrameFormat::bit_rate(double f_carrier) const {
  return symbol_bits * f_carrier / frame_cycles();
}

void FrameFormat::validate() const {
  if (excitation_cycles < 1 || ringdown_cycles < 1 || symbol_bits < 1 || symbol_bits > 8 ||
      cycle_spacing < 1 || base_cycle < 0 || scee_cycles < 1) {
    fail(ErrorKind::config, "frame format: non-positive field");
  }
  // The latest trigger plus the extraction cycles must fit in the ringdown.
  if (base_cycle + cycle_spacing * (code_count() - 2) + scee_cycles > ringdown_cycles) {
    fail(ErrorKind::config, "frame format: latest symbol does not fit in the ringdown");
  }
}

std::optional<int> encode_symbol(int code, const FrameFormat& fmt) {
  if (code < 0 || code >= fmt.code_count()) {
    fail(ErrorKind::input, "encode_symbol: code " + std::to_string(code) + " out of range");
  }
  if (code == 0) return std::nullopt;
  return fmt.base_cycle + fmt.cycle_spacing * (code - 1);
}

SymbolStream frame_stream(std::span<const std::uint8_t> bits, const FrameFormat& fmt) {
  SymbolStream s;
  const auto width = static_cast<std::size_t>(fmt.symbol_bits);
  const std::size_t n_sym = (bits.size() + width - 1) / width;
  s.padding_bits = static_cast<int>(n_sym * width - bits.size());
  s.symbols.reserve(n_sym);
  for (std::size_t i = 0; i < n_sym; ++i) {
    int sym = 0;
    for (std::size_t b = 0; b < width; ++b) {
      const std::size_t idx = i * width + b;
      sym = (sym << 1) | (idx < bits.size() && bits[idx] ? 1 : 0);
    }
    s.symbols.push_back(sym);
  }
  return s;
}

std::vector<std::uint8_t> unframe_stream(const SymbolStream& stream, const FrameFormat& fmt) {
  std::vector<std::uint8_t> bits;
  bits.reserve(stream.symbols.size() * static_cast<std::size_t>(fmt.symbol_bits));
  for (int sym : stream.symbols) {
    for (int b = fmt.symbol_bits - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((sym >> b) & 1));
  }
  const auto pad = static_cast<std::size_t>(stream.padding_bits);
  bits.resize(bits.size() >= pad ? bits.size() - pad : 0);
  return bits;
}

std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> bits;
  bits.reserve(bytes.size() * 8);
  for (std::uint8_t byte : bytes) {
    for (int b = 7; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((byte >> b) & 1));
  }
  return bits;
}

std::vector<std::int32_t> envelope(const RxCapture& capture, double carrier_period_samples) {
  if (!(carrier_period_samples >= 4.0)) {
    fail(ErrorKind::input, "envelope: need at least 4 samples per carrier period");
  }
  const std::size_t start = capture.trigger_index;
  const std::size_t n = capture.samples.size();
  if (start >= n || n - start < static_cast<std::size_t>(std::ceil(carrier_period_samples))) {
    fail(ErrorKind::input, "envelope: capture shorter than one carrier cycle");
  }
  const auto& k = kernels::active();
  std::vector<std::int32_t> env;
  for (std::size_t cycle = 0;; ++cycle) {
    const auto lo = start + static_cast<std::size_t>(std::llround(cycle * carrier_period_samples));
    const auto hi = start + static_cast<std::size_t>(std::llround((cycle + 1) * carrier_period_samples));
    if (hi > n) break;
    env.push_back(k.max_abs_i32(capture.samples.data() + lo, hi - lo));
  }
  return env;
}

DropDecision demod_drop(const RxCapture& capture, const FrameFormat& fmt,
                        const DropDetectConfig& cfg, double carrier_period_samples) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) fail(ErrorKind::config, "drop detect: gamma must be in (0,1)");
  const auto env = envelope(capture, carrier_period_samples);
  const auto limit = std::min<std::size_t>(env.size(), static_cast<std::size_t>(fmt.ringdown_cycles));
  DropDecision out;
  for (std::size_t n = 1; n < limit; ++n) {
    const double delta = static_cast<double>(env[n - 1]) - static_cast<double>(env[n]);
    const double threshold =
        cfg.mode == ThresholdMode::relative
            ? cfg.gamma * env[n - 1]
            : cfg.gamma * env[0] * std::exp(-static_cast<double>(n) * kPi / cfg.q_hat);
    if (delta > threshold) {
      out.flagged_cycle = static_cast<int>(n);
      break;
    }
  }
  if (!out.flagged_cycle) return out;  // no drop: code 0

  int best_code = 1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int code = 1; code < fmt.code_count(); ++code) {
    const double expected = *encode_symbol(code, fmt) + cfg.lag;
    const double d = std::abs(*out.flagged_cycle - expected);
    if (d < best_dist) {
      best_dist = d;
      best_code = code;
    }
  }
  out.code = best_code;
  out.decode_error = best_dist > 0.5 * fmt.cycle_spacing;
  return out;
}

int bit_errors(int sent, int received, int symbol_bits) {
  if (received < 0) return symbol_bits;
  return std::popcount(static_cast<unsigned>(sent ^ received) & ((1u << symbol_bits) - 1u));
}

}  // namespace meb
