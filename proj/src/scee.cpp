#include "meb/scee.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace meb {

std::vector<double> SceeBank::capacitances() const {
  if (n_fly == 0) return {};
  if (!(c_fly_total > 0.0)) fail(ErrorKind::input, "scee bank: total capacitance must be positive");
  return std::vector<double>(n_fly, c_fly_total / static_cast<double>(n_fly));
}

std::vector<SwitchEvent> flip_events(const SceeBank& bank, double t, int polarity_before) {
  const int pol = polarity_before >= 0 ? +1 : -1;
  std::vector<SwitchEvent> events;
  events.reserve(2 * bank.n_fly + 1);
  for (std::size_t k = 0; k < bank.n_fly; ++k) events.push_back(SwitchEvent::connect(t, k, pol));
  events.push_back(SwitchEvent::short_terminal(t));
  for (std::size_t k = bank.n_fly; k-- > 0;) events.push_back(SwitchEvent::connect(t, k, -pol));
  return events;
}

SceeSchedule build_scee_schedule(const SceeBank& bank, std::span<const double> peak_times,
                                 std::span<const int> polarities) {
  if (peak_times.size() != polarities.size()) {
    fail(ErrorKind::input, "scee schedule: one polarity per peak required");
  }
  SceeSchedule s;
  for (std::size_t i = 0; i < peak_times.size(); ++i) {
    if (polarities[i] != 1 && polarities[i] != -1) {
      fail(ErrorKind::input, "scee schedule: polarity must be +1 or -1");
    }
    if (i > 0) {
      if (!(peak_times[i] > peak_times[i - 1])) {
        fail(ErrorKind::input, "scee schedule: peak times must increase strictly");
      }
      if (polarities[i] == polarities[i - 1]) {
        fail(ErrorKind::input, "scee schedule: peak polarities must alternate");
      }
    }
    auto ev = flip_events(bank, peak_times[i], polarities[i]);
    s.events.insert(s.events.end(), ev.begin(), ev.end());
    s.flip_times.push_back(peak_times[i]);
    s.polarities.push_back(polarities[i]);
  }
  return s;
}

double steady_state_flip_efficiency(const SceeBank& bank, double c_p, int flips) {
  if (bank.n_fly == 0) return 0.0;
  const TransducerModel dummy(c_p, {ResonanceBranch::from_resonance(1.0, 1.0, 1.0)});
  const Circuit circuit{dummy, bank.capacitances()};
  CircuitState state = init_state(dummy, bank.n_fly);
  double ratio = 0.0;
  int sign = +1;
  for (int f = 0; f < flips; ++f) {
    state.v_cp = sign;  // unit-magnitude peak of alternating sign
    for (const auto& ev : flip_events(bank, 0.0, sign)) {
      state = apply_charge_share(circuit, state, ev).state;
    }
    ratio = std::abs(state.v_cp);
    sign = -sign;
  }
  return ratio;
}

double cycle_amplitude(const WaveformTrace& trace, const std::string& probe, double t,
                       double period) {
  const auto v = trace.column(probe);
  const auto lo = std::lower_bound(trace.time.begin(), trace.time.end(), t);
  const auto hi = std::lower_bound(trace.time.begin(), trace.time.end(), t + period);
  if (lo == trace.time.end() || hi == lo || t + period > trace.time.back() + trace.sample_interval) {
    fail(ErrorKind::input, "cycle amplitude: window outside the trace");
  }
  const auto a = static_cast<std::size_t>(lo - trace.time.begin());
  const auto b = static_cast<std::size_t>(hi - trace.time.begin());
  const auto [mn, mx] = std::minmax_element(v.begin() + a, v.begin() + b);
  return 0.5 * (*mx - *mn);
}

double amplitude_reduction(const WaveformTrace& trace, const std::string& probe,
                           double t_scee_start, double t_scee_end, double period,
                           int window_cycles) {
  if (window_cycles < 1 || !(period > 0.0)) fail(ErrorKind::input, "amplitude reduction: bad window");
  if (trace.time.empty() || t_scee_start - window_cycles * period < trace.time.front() ||
      t_scee_end + window_cycles * period > trace.time.back()) {
    fail(ErrorKind::input, "amplitude reduction: trace does not span the windows");
  }
  double before = 0.0, after = 0.0;
  for (int k = 0; k < window_cycles; ++k) {
    before += cycle_amplitude(trace, probe, t_scee_start - (k + 1) * period, period);
    after += cycle_amplitude(trace, probe, t_scee_end + k * period, period);
  }
  if (before <= 0.0) return 0.0;
  return std::clamp(1.0 - after / before, 0.0, 1.0);
}

std::string schedule_to_json_text(const SceeSchedule& schedule) {
  nlohmann::json j;
  j["flips"] = nlohmann::json::array();
  for (std::size_t i = 0; i < schedule.flip_times.size(); ++i) {
    j["flips"].push_back({{"t_s", schedule.flip_times[i]},
                          {"polarity", schedule.polarities[i] > 0 ? "+" : "-"}});
  }
  return j.dump(2);
}

SceeSchedule schedule_from_json_text(const SceeBank& bank, const std::string& text) {
  std::vector<double> times;
  std::vector<int> pols;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& f : j.at("flips")) {
      times.push_back(f.at("t_s").get<double>());
      const auto p = f.at("polarity").get<std::string>();
      if (p != "+" && p != "-") fail(ErrorKind::input, "schedule json: polarity must be \"+\" or \"-\"");
      pols.push_back(p == "+" ? 1 : -1);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, std::string("schedule json: ") + e.what());
  }
  return build_scee_schedule(bank, times, pols);
}

}  // namespace meb
