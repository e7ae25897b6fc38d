#pragma once

// Monte-Carlo bit-error-rate evaluation of the PWM link and training-set
// synthesis from simulated frames.

#include <optional>
#include <string>
#include <vector>

#include "meb/link.hpp"
#include "meb/mlp.hpp"

namespace meb {

enum class Decoder { drop, mlp };

std::string to_string(Decoder d);
Decoder parse_decoder(const std::string& name);

struct BerCondition {
  std::string label;
  LinkConfig link;
};

struct BerOptions {
  std::size_t n_packets = 1000;
  std::uint64_t seed = 1;
  std::vector<Decoder> decoders = {Decoder::drop};
  DropDetectConfig drop;
  const QuantizedMlp* mlp = nullptr;  // required when Decoder::mlp is selected
};

struct BerRow {
  std::string condition;
  Decoder decoder = Decoder::drop;
  double distance = 0.0;
  double noise_rms = 0.0;
  double snr_db = 0.0;        // weakest-code drop over noise_rms; +inf when noiseless
  std::size_t packets = 0;
  std::size_t bits = 0;
  std::size_t bit_errors = 0;
  std::size_t decode_errors = 0;
  double ber = 0.0;
};

// Decoding of one captured frame.
int decode_drop(const LinkSimulator& sim, const RxCapture& capture, const DropDetectConfig& cfg,
                bool* decode_error = nullptr);

// Every decoder sees the same captures within a condition. Packet p of
// condition c draws its code and noise from derive_seed(seed, c, p).
std::vector<BerRow> ber_sweep(const LinkSimulator& sim, std::span<const BerCondition> conditions,
                              const BerOptions& options);

void write_ber_csv(const std::string& path, std::span<const BerRow> rows);

// Labeled MLP windows: `per_class` noisy captures of every code under each
// condition.
std::vector<LabeledWindow> synthesize_windows(const LinkSimulator& sim,
                                              std::span<const BerCondition> conditions,
                                              std::size_t per_class, std::uint64_t seed,
                                              std::vector<RxCapture>* captures = nullptr);

// Conditions at distances d (m) with auto gain and a common noise_rms chosen
// so that the weakest code has `snr_db` at `ref_distance`.
std::vector<BerCondition> distance_conditions(const LinkSimulator& sim, const LinkConfig& base,
                                              std::span<const double> distances,
                                              std::optional<double> snr_db, double ref_distance);

}  // namespace meb
