#pragma once

// Fixed-step time-domain simulation of the transducer with a bank of flying
// capacitors. The continuous part (c_p plus motional branches) is integrated
// with the trapezoidal rule; switch events are ideal, instantaneous charge
// sharing applied at step boundaries.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "meb/transducer.hpp"

namespace meb {

struct Circuit {
  TransducerModel model;
  std::vector<double> c_fly;  // farad, one entry per flying capacitor

  std::size_t n_fly() const noexcept { return c_fly.size(); }
};

struct CircuitState {
  double t = 0.0;
  double v_cp = 0.0;
  std::vector<double> i_l;    // branch inductor currents
  std::vector<double> v_c;    // branch compliance-capacitor voltages
  std::vector<double> v_fly;  // flying-capacitor voltages
};

struct DriveConfig {
  double amplitude = 0.0;  // drive units, scaled by model.drive_gain()
  double f_drive = 1.0;    // Hz
  double t_start = 0.0;    // on window [t_start, t_stop)
  double t_stop = 0.0;

  double source_voltage(const TransducerModel& model, double t) const;
  static DriveConfig off() { return {}; }
};

enum class SwitchAction { connect_fly, short_terminal, open_all };

struct SwitchEvent {
  double t = 0.0;
  SwitchAction action = SwitchAction::open_all;
  std::size_t fly_index = 0;  // connect_fly only
  int polarity = +1;          // connect_fly only: +1 or -1

  static SwitchEvent connect(double t, std::size_t k, int polarity) {
    return {t, SwitchAction::connect_fly, k, polarity};
  }
  static SwitchEvent short_terminal(double t) { return {t, SwitchAction::short_terminal, 0, +1}; }
  static SwitchEvent open_all(double t) { return {t, SwitchAction::open_all, 0, +1}; }
};

CircuitState init_state(const TransducerModel& model, std::size_t n_fly);

double total_energy(const CircuitState& state, const Circuit& circuit);
// Energy stored in the motional branches only (inductors and compliances).
double mechanical_energy(const CircuitState& state, const TransducerModel& model);

struct ChargeShareResult {
  CircuitState state;
  double e_loss = 0.0;  // joules dissipated by the redistribution
};

ChargeShareResult apply_charge_share(const Circuit& circuit, const CircuitState& state,
                                     const SwitchEvent& event);

// One trapezoidal step for a fixed dt. Construction factors the system once.
class TrapezoidStepper {
 public:
  TrapezoidStepper(const TransducerModel& model, double dt);

  double dt() const noexcept { return dt_; }

  // Advance `state` by dt with branch-0 source voltages s0 at t and s1 at
  // t + dt. Returns the energy dissipated in the branch resistances.
  double advance(CircuitState& state, double s0, double s1);

 private:
  std::size_t order_;
  double dt_;
  Eigen::VectorXd resistances_;
  Eigen::MatrixXd propagate_;  // (I - dt/2 A)^-1 (I + dt/2 A)
  Eigen::VectorXd source_;     // (I - dt/2 A)^-1 dt/2 e_i0 / L0
  Eigen::VectorXd x_, x_next_;
};

// Largest step accepted: T0/100 with T0 the branch-0 series period.
double max_step(const TransducerModel& model);
// Default step: T0/200.
double default_step(const TransducerModel& model);

CircuitState step(const TransducerModel& model, const CircuitState& state, double dt,
                  const DriveConfig& drive);

struct WaveformTrace {
  std::vector<std::string> names;          // probe names, "v_cp" first
  std::vector<double> time;                // uniform samples
  std::vector<std::vector<double>> columns;
  double dt = 0.0;                         // integration step
  double sample_interval = 0.0;
  double max_event_snap_error = 0.0;       // |event time - boundary time|, <= dt/2
  double event_loss = 0.0;                 // sum of charge-sharing losses, J
  double resistive_loss = 0.0;             // J
  double source_work = 0.0;                // J delivered by the drive

  std::span<const double> column(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t size() const noexcept { return time.size(); }
};

struct RunOptions {
  double dt = 0.0;                   // 0 selects default_step(model)
  double t_end = 0.0;
  std::size_t record_every = 1;
  // Recognized probes: v_cp, i_l<k>, v_c<k>, v_fly<k>, energy, e_mech.
  std::vector<std::string> probes = {"v_cp"};
};

// Simulate from rest (or from `initial` when given). Deterministic.
WaveformTrace run(const Circuit& circuit, const DriveConfig& drive,
                  std::span<const SwitchEvent> schedule, const RunOptions& options,
                  const CircuitState* initial = nullptr, CircuitState* final_state = nullptr);

// WaveformTrace CSV: `time_s,<probe>...`, 17 significant digits.
void write_trace_csv(const std::string& path, const WaveformTrace& trace);

}  // namespace meb
