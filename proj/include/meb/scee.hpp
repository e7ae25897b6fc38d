#pragma once

// Switched-capacitor energy extraction: the switch micro-sequence of one
// voltage flip, the 8-flip schedule, and amplitude-reduction measurement.

#include <span>
#include <string>
#include <vector>

#include "meb/transient.hpp"

namespace meb {

struct SceeBank {
  std::size_t n_fly = 4;
  double c_fly_total = 1.2e-9;  // farad, split equally

  std::vector<double> capacitances() const;
};

struct SceeSchedule {
  std::vector<SwitchEvent> events;
  std::vector<double> flip_times;
  std::vector<int> polarities;  // sign of v_cp just before each flip

  bool empty() const noexcept { return flip_times.empty(); }
};

// One flip at time t: extract into fly 0..n-1 (matching polarity), short the
// terminal, then rebuild from fly n-1..0 with the opposite polarity.
std::vector<SwitchEvent> flip_events(const SceeBank& bank, double t, int polarity_before);

// Flips at each peak; polarities must alternate and times strictly increase.
SceeSchedule build_scee_schedule(const SceeBank& bank, std::span<const double> peak_times,
                                 std::span<const int> polarities);

// |v_after| / |v_before| of a flip once the bank has reached its periodic
// steady state under flips of constant magnitude. 0 for an empty bank.
double steady_state_flip_efficiency(const SceeBank& bank, double c_p, int flips = 400);

// Peak amplitude per carrier cycle: half the peak-to-peak excursion inside
// [t, t + period). Insensitive to the DC offset a flip leaves on c_p.
double cycle_amplitude(const WaveformTrace& trace, const std::string& probe, double t,
                       double period);

// 1 - mean amplitude over `window_cycles` after t_scee_end / mean amplitude
// over `window_cycles` before t_scee_start, clamped to [0, 1].
double amplitude_reduction(const WaveformTrace& trace, const std::string& probe,
                           double t_scee_start, double t_scee_end, double period,
                           int window_cycles);

// Schedule JSON: {"flips":[{"t_s":...,"polarity":"+"}, ...]}
std::string schedule_to_json_text(const SceeSchedule& schedule);
SceeSchedule schedule_from_json_text(const SceeBank& bank, const std::string& text);

}  // namespace meb
