#pragma once

// Peak-detector timing: behavioural zero-crossing detector, the TDC that
// measures the carrier period in delay-line steps, and the shift-only
// arithmetic that turns that code into T/4 and 3T/4 delays.

#include <cstdint>
#include <span>
#include <vector>

#include "meb/transient.hpp"

namespace meb {

// 5-bit binary cycle count plus a 7-bit thermometer stage count.
struct TdcCode {
  int d_cyc = 0;  // 0..31
  int d_stg = 0;  // 0..7, number of ones in the thermometer word

  int total_steps() const noexcept { return 8 * d_cyc + d_stg; }
  // Thermometer word D_STG<6:0>: bit k set iff d_stg >= k + 1.
  std::uint8_t thermometer() const noexcept;
  static TdcCode from_thermometer(int d_cyc, std::uint8_t word);

  friend bool operator==(const TdcCode&, const TdcCode&) = default;
};

void validate(const TdcCode& code);

struct ZcdConfig {
  double t_delay_step = 15e-9;  // s, one delay-line stage
  double base_delay = 0.0;      // s, fixed comparator delay
  double adaptive_coeff = 0.0;  // delay removed per cycle, in units of t_delay_step
};

// First rising zero crossing at or after t_from (linear interpolation), plus
// the modelled detection delay max(0, base_delay - adaptive_coeff * cycle * step).
double detect_zero_crossing(std::span<const double> time, std::span<const double> v,
                            double t_from, const ZcdConfig& cfg = {}, int cycle_index = 0);
double detect_zero_crossing(const WaveformTrace& trace, double t_from, const ZcdConfig& cfg = {},
                            int cycle_index = 0);

TdcCode tdc_encode(double interval, double t_delay);
double tdc_decode(const TdcCode& code, double t_delay);

struct DpsOptions {
  // Second pulse = first pulse + three_quarter_delay (the printed 3T/4 term
  // is ~T/2). When false the term is used as an absolute delay from the ZC.
  bool incremental_three_quarter = true;
  // Thermometer bit k reads as [d_stg >= k + offset].
  int thermometer_offset = 1;
};

// Shift-only T/4 in delay steps.
int quarter_delay(const TdcCode& code, const DpsOptions& opt = {});
// Shift-only "3T/4" term in delay steps, as printed.
int three_quarter_delay(const TdcCode& code, const DpsOptions& opt = {});

// 2 * n_cycles EN_SCEE pulse times derived from one zero crossing.
std::vector<double> en_scee_pulses(double zc_time, const TdcCode& code, double t_delay,
                                   int n_cycles = 4, const DpsOptions& opt = {});

}  // namespace meb
