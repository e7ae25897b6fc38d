#include "meb/recording.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "meb/csv.hpp"

namespace meb {

void CicConfig::validate() const {
  if (stages < 1) fail(ErrorKind::config, "cic: stages must be >= 1");
  if (decimation < 2) fail(ErrorKind::config, "cic: decimation must be >= 2");
  // Register growth for 32-bit inputs must fit the 64-bit accumulators.
  const double growth = stages * std::log2(static_cast<double>(decimation));
  if (32.0 + growth > 63.0) fail(ErrorKind::config, "cic: register growth exceeds 64 bits");
}

std::int64_t CicConfig::dc_gain() const {
  std::int64_t g = 1;
  for (int i = 0; i < stages; ++i) g *= decimation;
  return g;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

std::vector<std::int32_t> cic_decimate(std::span<const std::int32_t> input, const CicConfig& cfg) {
  cfg.validate();
  const auto r = static_cast<std::size_t>(cfg.decimation);
  if (input.size() < r) fail(ErrorKind::input, "cic: input shorter than the decimation factor");
  const auto n_st = static_cast<std::size_t>(cfg.stages);
  std::vector<std::uint64_t> integ(n_st, 0), comb_delay(n_st, 0);
  const std::int64_t gain = cfg.dc_gain();
  std::vector<std::int32_t> out;
  out.reserve(input.size() / r);
  for (std::size_t n = 0; n < input.size(); ++n) {
    std::uint64_t v = static_cast<std::uint64_t>(static_cast<std::int64_t>(input[n]));
    for (auto& acc : integ) {
      acc += v;
      v = acc;
    }
    if (n % r != r - 1) continue;
    for (std::size_t s = 0; s < n_st; ++s) {
      const std::uint64_t prev = comb_delay[s];
      comb_delay[s] = v;
      v -= prev;
    }
    const auto y = static_cast<std::int64_t>(v);
    out.push_back(static_cast<std::int32_t>(floor_div(y + gain / 2, gain)));
  }
  return out;
}

DeltaStream delta_encode(std::span<const std::int32_t> samples) {
  DeltaStream s;
  if (samples.empty()) return s;
  for (auto x : samples) {
    if (x < std::numeric_limits<std::int16_t>::min() || x > std::numeric_limits<std::int16_t>::max()) {
      fail(ErrorKind::input, "delta: sample outside the 16-bit range");
    }
  }
  s.initial = static_cast<std::int16_t>(samples[0]);
  std::int32_t est = s.initial;
  s.residuals.reserve(samples.size());
  for (auto x : samples) {
    const std::int32_t d = x - est;
    const std::int32_t r = std::clamp(d, -128, 127);
    s.overload_count += r != d;
    s.residuals.push_back(static_cast<std::int8_t>(r));
    est += r;
  }
  return s;
}

std::vector<std::int32_t> delta_decode(const DeltaStream& stream) {
  std::vector<std::int32_t> out;
  out.reserve(stream.residuals.size());
  std::int32_t est = stream.initial;
  for (auto r : stream.residuals) {
    est += r;
    out.push_back(est);
  }
  return out;
}

std::vector<std::uint8_t> delta_to_bits(const DeltaStream& stream) {
  std::vector<std::uint8_t> bits;
  bits.reserve(16 + 8 * stream.residuals.size());
  const auto init = static_cast<std::uint16_t>(stream.initial);
  for (int b = 15; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((init >> b) & 1u));
  for (auto r : stream.residuals) {
    const auto u = static_cast<std::uint8_t>(r);
    for (int b = 7; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((u >> b) & 1u));
  }
  return bits;
}

DeltaStream delta_from_bits(std::span<const std::uint8_t> bits, std::size_t n_samples) {
  if (n_samples == 0) return {};
  if (bits.size() < 16 + 8 * n_samples) fail(ErrorKind::input, "delta: bit stream too short");
  DeltaStream s;
  std::uint16_t init = 0;
  for (std::size_t i = 0; i < 16; ++i) init = static_cast<std::uint16_t>((init << 1) | (bits[i] & 1u));
  s.initial = static_cast<std::int16_t>(init);
  for (std::size_t n = 0; n < n_samples; ++n) {
    std::uint8_t u = 0;
    for (std::size_t b = 0; b < 8; ++b) u = static_cast<std::uint8_t>((u << 1) | (bits[16 + 8 * n + b] & 1u));
    s.residuals.push_back(static_cast<std::int8_t>(u));
  }
  return s;
}

FifoStats simulate_fifo(std::size_t n_samples, double sample_rate, int sample_bits, int symbol_bits,
                        double symbol_rate, std::size_t depth) {
  if (!(sample_rate > 0.0) || !(symbol_rate > 0.0) || sample_bits < 1 || symbol_bits < 1 || depth < 1) {
    fail(ErrorKind::config, "fifo: rates, widths and depth must be positive");
  }
  FifoStats st;
  std::size_t occupancy = 0;
  long long pending_bits = 0;
  std::size_t next_service = 1;
  for (std::size_t n = 0; n < n_samples; ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    // Frames that start before this sample is produced take one symbol each.
    while (static_cast<double>(next_service) / symbol_rate < t) {
      if (occupancy > 0) {
        --occupancy;
        ++st.served;
      }
      ++next_service;
    }
    pending_bits += sample_bits;
    while (pending_bits >= symbol_bits) {
      pending_bits -= symbol_bits;
      ++st.produced;
      if (occupancy == depth) {
        ++st.overflow;
      } else {
        ++occupancy;
      }
    }
    st.max_occupancy = std::max(st.max_occupancy, occupancy);
  }
  return st;
}

double LfpFrontEnd::lsb() const { return adc_full_scale / std::ldexp(1.0, adc_bits); }

void LfpFrontEnd::validate() const {
  if (!(lna_gain > 0.0)) fail(ErrorKind::config, "lfp: lna_gain must be positive");
  if (adc_bits < 2 || adc_bits > 16) fail(ErrorKind::config, "lfp: adc_bits must be in 2..16");
  if (!(adc_full_scale > 0.0)) fail(ErrorKind::config, "lfp: adc_full_scale must be positive");
  if (!(input_fs > 0.0)) fail(ErrorKind::config, "lfp: input_fs must be positive");
}

std::vector<std::int32_t> quantize_lfp(std::span<const double> volts, const LfpFrontEnd& fe) {
  fe.validate();
  const double hi = std::ldexp(1.0, fe.adc_bits - 1) - 1.0;
  const double scale = fe.lna_gain / fe.lsb();
  std::vector<std::int32_t> out(volts.size());
  for (std::size_t i = 0; i < volts.size(); ++i) {
    out[i] = static_cast<std::int32_t>(std::clamp(std::nearbyint(volts[i] * scale), -hi - 1.0, hi));
  }
  return out;
}

StreamReport stream_pipeline(std::span<const double> time, std::span<const double> volts,
                             const LinkSimulator& sim, const StreamConfig& cfg) {
  cfg.front_end.validate();
  cfg.cic.validate();
  if (time.size() != volts.size()) fail(ErrorKind::input, "stream: time/volts length mismatch");
  if (time.size() < static_cast<std::size_t>(cfg.cic.decimation)) {
    fail(ErrorKind::input, "stream: input shorter than the decimation factor");
  }
  const double fs_file = static_cast<double>(time.size() - 1) / (time.back() - time.front());
  if (!(std::abs(fs_file / cfg.front_end.input_fs - 1.0) < 1e-3)) {
    fail(ErrorKind::input, "stream: input sampled at " + format_double(fs_file) + " Hz, expected " +
                               format_double(cfg.front_end.input_fs));
  }
  if (cfg.decoder == Decoder::mlp && !cfg.mlp) fail(ErrorKind::config, "stream: mlp decoder needs a model");

  StreamReport rep;
  const auto codes = quantize_lfp(volts, cfg.front_end);
  rep.cic_out = cic_decimate(codes, cfg.cic);
  const auto ds = delta_encode(rep.cic_out);
  rep.overload_count = ds.overload_count;
  const auto bits = delta_to_bits(ds);
  const auto& fmt = sim.setup().fmt;
  const auto stream = frame_stream(bits, fmt);

  const double out_fs = cfg.front_end.input_fs / cfg.cic.decimation;
  const double frame_rate = sim.carrier_frequency() / fmt.frame_cycles();
  rep.source_bit_rate = out_fs * 8.0;
  rep.link_bit_rate = frame_rate * fmt.symbol_bits;
  rep.fifo = simulate_fifo(rep.cic_out.size(), out_fs, 8, fmt.symbol_bits, frame_rate, cfg.fifo_depth);

  std::optional<IntegerMlp> mlp;
  if (cfg.decoder == Decoder::mlp) mlp.emplace(*cfg.mlp);
  SymbolStream rx{{}, stream.padding_bits};
  rx.symbols.reserve(stream.symbols.size());
  for (std::size_t i = 0; i < stream.symbols.size(); ++i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 7, i));
    const auto cap = sim.capture(stream.symbols[i], cfg.link, rng);
    int got = cfg.decoder == Decoder::drop ? decode_drop(sim, cap, cfg.drop) : mlp->infer(mlp_window(cap)).code;
    rx.symbols.push_back(got < 0 ? 0 : got);
  }
  const auto rx_bits = unframe_stream(rx, fmt);
  rep.bits = bits.size();
  for (std::size_t i = 0; i < bits.size(); ++i) rep.bit_errors += bits[i] != rx_bits[i];
  rep.ber = rep.bits ? static_cast<double>(rep.bit_errors) / static_cast<double>(rep.bits) : 0.0;

  rep.reconstructed = delta_decode(delta_from_bits(rx_bits, rep.cic_out.size()));
  rep.bit_exact = rep.reconstructed == rep.cic_out;
  const auto r = static_cast<double>(cfg.cic.decimation);
  for (std::size_t m = 0; m < rep.cic_out.size(); ++m) {
    rep.time.push_back(time.front() + (static_cast<double>(m) * r + r - 1.0) / cfg.front_end.input_fs);
  }
  rep.volts_per_code = cfg.front_end.lsb() / cfg.front_end.lna_gain;
  return rep;
}

void read_lfp_csv(const std::string& path, std::vector<double>& time, std::vector<double>& volts) {
  const auto rows = read_csv(path, {"time_s", "volts"});
  time.clear();
  volts.clear();
  for (const auto& r : rows) {
    if (!time.empty() && !(r[0] > time.back())) fail(ErrorKind::input, path + ": time_s must increase");
    time.push_back(r[0]);
    volts.push_back(r[1]);
  }
}

void write_lfp_csv(const std::string& path, std::span<const double> time, std::span<const double> volts) {
  CsvWriter w(path, {"time_s", "volts"});
  for (std::size_t i = 0; i < time.size(); ++i) w.row({time[i], volts[i]});
  w.commit();
}

std::string stream_report_json(const StreamReport& r, std::uint64_t seed) {
  nlohmann::json j;
  j["ber"] = r.ber;
  j["overload_count"] = r.overload_count;
  j["fifo_max"] = r.fifo.max_occupancy;
  j["fifo_overflow"] = r.fifo.overflow;
  j["bits"] = r.bits;
  j["bit_errors"] = r.bit_errors;
  j["bit_exact"] = r.bit_exact;
  j["samples"] = r.cic_out.size();
  j["source_bit_rate"] = r.source_bit_rate;
  j["link_bit_rate"] = r.link_bit_rate;
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace meb
