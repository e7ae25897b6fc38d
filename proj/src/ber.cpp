#include "meb/ber.hpp"

#include <cmath>
#include <limits>

#include "meb/csv.hpp"

namespace meb {

std::string to_string(Decoder d) { return d == Decoder::drop ? "drop" : "mlp"; }

Decoder parse_decoder(const std::string& name) {
  if (name == "drop") return Decoder::drop;
  if (name == "mlp") return Decoder::mlp;
  fail(ErrorKind::config, "unknown decoder '" + name + "' (expected drop or mlp)");
}

int decode_drop(const LinkSimulator& sim, const RxCapture& capture, const DropDetectConfig& cfg,
                bool* decode_error) {
  const auto d = demod_drop(capture, sim.setup().fmt, cfg, sim.period_samples());
  if (decode_error) *decode_error = d.decode_error;
  return d.decode_error ? -1 : d.code;
}

namespace {

int weakest_code(const LinkSimulator& sim) { return sim.setup().fmt.code_count() - 1; }

}  // namespace

std::vector<BerRow> ber_sweep(const LinkSimulator& sim, std::span<const BerCondition> conditions,
                              const BerOptions& options) {
  if (options.n_packets < 1) fail(ErrorKind::config, "ber sweep: n_packets must be >= 1");
  if (options.decoders.empty()) fail(ErrorKind::config, "ber sweep: no decoder selected");
  std::optional<IntegerMlp> mlp;
  for (auto d : options.decoders) {
    if (d == Decoder::mlp && !mlp) {
      if (!options.mlp) fail(ErrorKind::config, "ber sweep: mlp decoder needs a model");
      mlp.emplace(*options.mlp);
    }
  }
  const auto& fmt = sim.setup().fmt;
  std::vector<BerRow> rows;
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const auto& cond = conditions[ci];
    cond.link.validate(sim.carrier_frequency());
    std::vector<BerRow> cond_rows;
    for (auto d : options.decoders) {
      BerRow r;
      r.condition = cond.label;
      r.decoder = d;
      r.distance = cond.link.distance;
      r.noise_rms = cond.link.noise_rms;
      r.snr_db = cond.link.noise_rms > 0.0
                     ? measure_snr(sim.drop_amplitude(weakest_code(sim), cond.link), cond.link.noise_rms)
                     : std::numeric_limits<double>::infinity();
      cond_rows.push_back(r);
    }
    for (std::size_t p = 0; p < options.n_packets; ++p) {
      std::mt19937_64 rng(derive_seed(options.seed, ci, p));
      const int code = std::uniform_int_distribution<int>(0, fmt.code_count() - 1)(rng);
      const auto cap = sim.capture(code, cond.link, rng);
      for (auto& r : cond_rows) {
        int got = 0;
        bool derr = false;
        if (r.decoder == Decoder::drop) {
          got = decode_drop(sim, cap, options.drop, &derr);
        } else {
          got = mlp->infer(mlp_window(cap)).code;
        }
        r.decode_errors += derr;
        r.bit_errors += static_cast<std::size_t>(bit_errors(code, got, fmt.symbol_bits));
        r.packets += 1;
        r.bits += static_cast<std::size_t>(fmt.symbol_bits);
      }
    }
    for (auto& r : cond_rows) {
      r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(r.bits);
      rows.push_back(r);
    }
  }
  return rows;
}

void write_ber_csv(const std::string& path, std::span<const BerRow> rows) {
  std::string text = "condition,decoder,distance_m,noise_rms_v,snr_db,packets,bits,bit_errors,decode_errors,ber\n";
  for (const auto& r : rows) {
    text += r.condition + "," + to_string(r.decoder) + "," + format_double(r.distance) + "," +
            format_double(r.noise_rms) + "," + format_double(r.snr_db) + "," + std::to_string(r.packets) +
            "," + std::to_string(r.bits) + "," + std::to_string(r.bit_errors) + "," +
            std::to_string(r.decode_errors) + "," + format_double(r.ber) + "\n";
  }
  write_text_file_atomic(path, text);
}

std::vector<LabeledWindow> synthesize_windows(const LinkSimulator& sim,
                                              std::span<const BerCondition> conditions,
                                              std::size_t per_class, std::uint64_t seed,
                                              std::vector<RxCapture>* captures) {
  std::vector<LabeledWindow> out;
  const int n_codes = sim.setup().fmt.code_count();
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (int code = 0; code < n_codes; ++code) {
        const auto idx = i * static_cast<std::size_t>(n_codes) + static_cast<std::size_t>(code);
        std::mt19937_64 rng(derive_seed(seed, 1000 + ci, idx));
        auto cap = sim.capture(code, conditions[ci].link, rng);
        out.push_back({mlp_window(cap), code});
        if (captures) captures->push_back(std::move(cap));
      }
    }
  }
  return out;
}

std::vector<BerCondition> distance_conditions(const LinkSimulator& sim, const LinkConfig& base,
                                              std::span<const double> distances,
                                              std::optional<double> snr_db, double ref_distance) {
  double noise = base.noise_rms;
  if (snr_db) {
    LinkConfig ref = base;
    ref.distance = ref_distance;
    noise = sim.noise_for_snr(ref, *snr_db, weakest_code(sim));
  }
  std::vector<BerCondition> out;
  for (double d : distances) {
    LinkConfig c = base;
    c.distance = d;
    c.noise_rms = noise;
    c = sim.with_auto_gain(c);
    char label[32];
    std::snprintf(label, sizeof label, "d=%gcm", d * 100.0);
    out.push_back({label, c});
  }
  return out;
}

}  // namespace meb
