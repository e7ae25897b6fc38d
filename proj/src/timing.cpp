#include "meb/timing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace meb {

std::uint8_t TdcCode::thermometer() const noexcept {
  return static_cast<std::uint8_t>((1u << std::clamp(d_stg, 0, 7)) - 1u);
}

TdcCode TdcCode::from_thermometer(int d_cyc, std::uint8_t word) {
  const unsigned w = word & 0x7Fu;
  // A valid thermometer word is a run of ones starting at bit 0.
  if ((w & (w + 1)) != 0) fail(ErrorKind::input, "tdc: not a thermometer word");
  TdcCode code{d_cyc, std::popcount(w)};
  validate(code);
  return code;
}

void validate(const TdcCode& code) {
  if (code.d_cyc < 0 || code.d_cyc > 31 || code.d_stg < 0 || code.d_stg > 7) {
    fail(ErrorKind::range, "tdc code out of range");
  }
}

double detect_zero_crossing(std::span<const double> time, std::span<const double> v,
                            double t_from, const ZcdConfig& cfg, int cycle_index) {
  if (time.size() != v.size()) fail(ErrorKind::input, "zcd: time and value lengths differ");
  const auto first = std::lower_bound(time.begin(), time.end(), t_from);
  for (auto i = static_cast<std::size_t>(first - time.begin()); i + 1 < v.size(); ++i) {
    if (v[i] <= 0.0 && v[i + 1] > 0.0) {
      const double frac = -v[i] / (v[i + 1] - v[i]);
      const double t = time[i] + frac * (time[i + 1] - time[i]);
      const double delay = std::max(
          0.0, cfg.base_delay - cfg.adaptive_coeff * cycle_index * cfg.t_delay_step);
      return t + delay;
    }
  }
  fail(ErrorKind::detection, "zcd: no rising zero crossing after t_from");
}

double detect_zero_crossing(const WaveformTrace& trace, double t_from, const ZcdConfig& cfg,
                            int cycle_index) {
  return detect_zero_crossing(trace.time, trace.column("v_cp"), t_from, cfg, cycle_index);
}

TdcCode tdc_encode(double interval, double t_delay) {
  if (!(t_delay > 0.0)) fail(ErrorKind::domain, "tdc: t_delay must be positive");
  if (!(interval >= 0.0) || !(interval < 256.0 * t_delay)) {
    fail(ErrorKind::range, "tdc: interval outside [0, 256 t_delay)");
  }
  // Relative slack absorbs rounding on exact multiples of the step.
  const auto total = static_cast<int>(std::floor(interval / t_delay * (1.0 + 1e-12)));
  return {std::min(total, 255) / 8, std::min(total, 255) % 8};
}

double tdc_decode(const TdcCode& code, double t_delay) {
  validate(code);
  return t_delay * code.total_steps();
}

namespace {

int thermometer_bit(const TdcCode& code, int k, const DpsOptions& opt) {
  return code.d_stg >= k + opt.thermometer_offset ? 1 : 0;
}

}  // namespace

int quarter_delay(const TdcCode& code, const DpsOptions& opt) {
  validate(code);
  const int c = code.d_cyc;
  // 8*D_CYC<4:2> + {D_CYC<1>, D_CYC<0>, D_STG<3>}
  return 8 * (c >> 2) + 4 * ((c >> 1) & 1) + 2 * (c & 1) + thermometer_bit(code, 3, opt);
}

int three_quarter_delay(const TdcCode& code, const DpsOptions& opt) {
  validate(code);
  const int c = code.d_cyc;
  // 8*D_CYC<4:1> + {D_CYC<0>, D_STG<5>, D_STG<1>}
  return 8 * (c >> 1) + 4 * (c & 1) + 2 * thermometer_bit(code, 5, opt) +
         thermometer_bit(code, 1, opt);
}

std::vector<double> en_scee_pulses(double zc_time, const TdcCode& code, double t_delay,
                                   int n_cycles, const DpsOptions& opt) {
  if (n_cycles < 1) fail(ErrorKind::input, "en_scee_pulses: n_cycles must be >= 1");
  const double period = tdc_decode(code, t_delay);
  const double t_q = t_delay * quarter_delay(code, opt);
  const double t_3q = t_delay * three_quarter_delay(code, opt);
  std::vector<double> pulses;
  pulses.reserve(2 * static_cast<std::size_t>(n_cycles));
  for (int i = 0; i < n_cycles; ++i) {
    const double base = zc_time + i * period;
    pulses.push_back(base + t_q);
    pulses.push_back(opt.incremental_three_quarter ? base + t_q + t_3q : base + t_3q);
  }
  return pulses;
}

}  // namespace meb
