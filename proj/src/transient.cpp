#include "meb/transient.hpp"

#include <algorithm>
#include <cmath>

#include "meb/csv.hpp"

namespace meb {

double DriveConfig::source_voltage(const TransducerModel& model, double t) const {
  if (t < t_start || t >= t_stop) return 0.0;
  return model.drive_gain() * amplitude * std::sin(2.0 * kPi * f_drive * t);
}

CircuitState init_state(const TransducerModel& model, std::size_t n_fly) {
  CircuitState s;
  s.i_l.assign(model.order(), 0.0);
  s.v_c.assign(model.order(), 0.0);
  s.v_fly.assign(n_fly, 0.0);
  return s;
}

double mechanical_energy(const CircuitState& state, const TransducerModel& model) {
  double e = 0.0;
  for (std::size_t k = 0; k < model.order(); ++k) {
    const auto& b = model.branches()[k];
    e += 0.5 * b.l_m * state.i_l[k] * state.i_l[k] + 0.5 * b.c_m * state.v_c[k] * state.v_c[k];
  }
  return e;
}

double total_energy(const CircuitState& state, const Circuit& circuit) {
  double e = mechanical_energy(state, circuit.model);
  e += 0.5 * circuit.model.c_p() * state.v_cp * state.v_cp;
  for (std::size_t k = 0; k < state.v_fly.size() && k < circuit.c_fly.size(); ++k) {
    e += 0.5 * circuit.c_fly[k] * state.v_fly[k] * state.v_fly[k];
  }
  return e;
}

ChargeShareResult apply_charge_share(const Circuit& circuit, const CircuitState& state,
                                     const SwitchEvent& event) {
  ChargeShareResult out{state, 0.0};
  const double c_p = circuit.model.c_p();
  switch (event.action) {
    case SwitchAction::open_all:
      return out;
    case SwitchAction::short_terminal:
      out.e_loss = 0.5 * c_p * state.v_cp * state.v_cp;
      out.state.v_cp = 0.0;
      return out;
    case SwitchAction::connect_fly: {
      const std::size_t k = event.fly_index;
      if (k >= circuit.n_fly() || k >= state.v_fly.size()) {
        fail(ErrorKind::input, "charge share: no flying capacitor " + std::to_string(k));
      }
      if (event.polarity != 1 && event.polarity != -1) {
        fail(ErrorKind::input, "charge share: polarity must be +1 or -1");
      }
      const double c_f = circuit.c_fly[k];
      const double v_f = event.polarity * state.v_fly[k];  // as seen from the terminal
      const double before = 0.5 * c_p * state.v_cp * state.v_cp + 0.5 * c_f * v_f * v_f;
      const double v = (c_p * state.v_cp + c_f * v_f) / (c_p + c_f);
      out.state.v_cp = v;
      out.state.v_fly[k] = event.polarity * v;
      const double after = 0.5 * (c_p + c_f) * v * v;
      out.e_loss = before - after;
      return out;
    }
  }
  return out;
}

double max_step(const TransducerModel& model) {
  return 1.0 / (100.0 * model.branches().front().series_resonance_hz());
}

double default_step(const TransducerModel& model) { return 0.5 * max_step(model); }

TrapezoidStepper::TrapezoidStepper(const TransducerModel& model, double dt)
    : order_(model.order()), dt_(dt) {
  if (!(dt > 0.0)) fail(ErrorKind::config, "step: dt must be positive");
  if (dt > max_step(model) * (1.0 + 1e-12)) {
    fail(ErrorKind::config, "step: dt exceeds T0/100 of the dominant branch");
  }
  // x = [v_cp, i_0..i_{N-1}, v_c0..v_c{N-1}]
  const auto n = static_cast<Eigen::Index>(1 + 2 * order_);
  const auto N = static_cast<Eigen::Index>(order_);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  resistances_.resize(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto& b = model.branches()[static_cast<std::size_t>(k)];
    a(0, 1 + k) = 1.0 / model.c_p();
    a(1 + k, 0) = -1.0 / b.l_m;
    a(1 + k, 1 + k) = -b.r_m / b.l_m;
    a(1 + k, 1 + N + k) = -1.0 / b.l_m;
    a(1 + N + k, 1 + k) = 1.0 / b.c_m;
    resistances_[k] = b.r_m;
  }
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const auto lu = (id - 0.5 * dt * a).partialPivLu();
  propagate_ = lu.solve(id + 0.5 * dt * a);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e[1] = 0.5 * dt / model.branches().front().l_m;
  source_ = lu.solve(e);
  x_.resize(n);
  x_next_.resize(n);
}

double TrapezoidStepper::advance(CircuitState& state, double s0, double s1) {
  const auto N = static_cast<Eigen::Index>(order_);
  x_[0] = state.v_cp;
  for (Eigen::Index k = 0; k < N; ++k) {
    x_[1 + k] = state.i_l[static_cast<std::size_t>(k)];
    x_[1 + N + k] = state.v_c[static_cast<std::size_t>(k)];
  }
  x_next_.noalias() = propagate_ * x_;
  x_next_ += (s0 + s1) * source_;
  double dissipated = 0.0;
  for (Eigen::Index k = 0; k < N; ++k) {
    const double i_mid = 0.5 * (x_[1 + k] + x_next_[1 + k]);
    dissipated += resistances_[k] * i_mid * i_mid;
  }
  state.v_cp = x_next_[0];
  for (Eigen::Index k = 0; k < N; ++k) {
    state.i_l[static_cast<std::size_t>(k)] = x_next_[1 + k];
    state.v_c[static_cast<std::size_t>(k)] = x_next_[1 + N + k];
  }
  state.t += dt_;
  return dissipated * dt_;
}

CircuitState step(const TransducerModel& model, const CircuitState& state, double dt,
                  const DriveConfig& drive) {
  TrapezoidStepper stepper(model, dt);
  CircuitState next = state;
  stepper.advance(next, drive.source_voltage(model, state.t),
                  drive.source_voltage(model, state.t + dt));
  return next;
}

// ---------------------------------------------------------------------------

std::span<const double> WaveformTrace::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return columns[i];
  }
  fail(ErrorKind::input, "trace has no probe '" + name + "'");
}

bool WaveformTrace::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

struct ProbeRef {
  enum Kind { v_cp, i_l, v_c, v_fly, energy, e_mech } kind;
  std::size_t index = 0;
};

ProbeRef parse_probe(const std::string& name, const Circuit& circuit) {
  auto indexed = [&](const std::string& prefix, ProbeRef::Kind kind, std::size_t limit) {
    const std::string tail = name.substr(prefix.size());
    if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos) {
      fail(ErrorKind::input, "unknown probe '" + name + "'");
    }
    const std::size_t k = std::stoul(tail);
    if (k >= limit) fail(ErrorKind::input, "probe index out of range: '" + name + "'");
    return ProbeRef{kind, k};
  };
  if (name == "v_cp") return {ProbeRef::v_cp};
  if (name == "energy") return {ProbeRef::energy};
  if (name == "e_mech") return {ProbeRef::e_mech};
  if (name.rfind("i_l", 0) == 0) return indexed("i_l", ProbeRef::i_l, circuit.model.order());
  if (name.rfind("v_fly", 0) == 0) return indexed("v_fly", ProbeRef::v_fly, circuit.n_fly());
  if (name.rfind("v_c", 0) == 0) return indexed("v_c", ProbeRef::v_c, circuit.model.order());
  fail(ErrorKind::input, "unknown probe '" + name + "'");
}

double read_probe(const ProbeRef& p, const CircuitState& s, const Circuit& circuit) {
  switch (p.kind) {
    case ProbeRef::v_cp: return s.v_cp;
    case ProbeRef::i_l: return s.i_l[p.index];
    case ProbeRef::v_c: return s.v_c[p.index];
    case ProbeRef::v_fly: return s.v_fly[p.index];
    case ProbeRef::energy: return total_energy(s, circuit);
    case ProbeRef::e_mech: return mechanical_energy(s, circuit.model);
  }
  return 0.0;
}

}  // namespace

WaveformTrace run(const Circuit& circuit, const DriveConfig& drive,
                  std::span<const SwitchEvent> schedule, const RunOptions& options,
                  const CircuitState* initial, CircuitState* final_state) {
  if (!(options.t_end > 0.0)) fail(ErrorKind::input, "run: t_end must be positive");
  if (options.record_every == 0) fail(ErrorKind::input, "run: record_every must be >= 1");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].t < schedule[i - 1].t) fail(ErrorKind::input, "run: schedule is not time-ordered");
  }
  const auto& model = circuit.model;
  const double dt = options.dt > 0.0 ? options.dt : default_step(model);
  TrapezoidStepper stepper(model, dt);

  WaveformTrace trace;
  trace.dt = dt;
  trace.sample_interval = dt * static_cast<double>(options.record_every);
  std::vector<ProbeRef> probes;
  trace.names.push_back("v_cp");
  probes.push_back({ProbeRef::v_cp});
  for (const auto& name : options.probes) {
    if (name == "v_cp") continue;
    probes.push_back(parse_probe(name, circuit));
    trace.names.push_back(name);
  }
  trace.columns.resize(probes.size());

  CircuitState state = initial ? *initial : init_state(model, circuit.n_fly());
  if (state.i_l.size() != model.order() || state.v_fly.size() != circuit.n_fly()) {
    fail(ErrorKind::input, "run: initial state does not match the circuit");
  }
  const double t0 = state.t;
  const auto n_steps = static_cast<std::size_t>(std::ceil(options.t_end / dt - 1e-9));
  const std::size_t reserve = n_steps / options.record_every + 2;
  trace.time.reserve(reserve);
  for (auto& c : trace.columns) c.reserve(reserve);

  std::size_t next_event = 0;
  auto apply_events = [&](std::size_t boundary) {
    while (next_event < schedule.size()) {
      const auto& ev = schedule[next_event];
      const double rel = (ev.t - t0) / dt;
      const auto target = rel <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(std::llround(rel));
      if (target > boundary) break;
      auto shared = apply_charge_share(circuit, state, ev);
      state = std::move(shared.state);
      trace.event_loss += shared.e_loss;
      trace.max_event_snap_error =
          std::max(trace.max_event_snap_error, std::abs(ev.t - (t0 + boundary * dt)));
      ++next_event;
    }
  };
  auto record = [&]() {
    trace.time.push_back(state.t);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      trace.columns[p].push_back(read_probe(probes[p], state, circuit));
    }
  };

  apply_events(0);
  record();
  double s_prev = drive.source_voltage(model, state.t);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    // Boundary times are recomputed from the index so long runs do not drift.
    const double t_next = t0 + static_cast<double>(n) * dt;
    const double s_next = drive.source_voltage(model, t_next);
    const double i0_before = state.i_l[0];
    trace.resistive_loss += stepper.advance(state, s_prev, s_next);
    trace.source_work += dt * 0.5 * (s_prev + s_next) * 0.5 * (i0_before + state.i_l[0]);
    state.t = t_next;
    s_prev = s_next;
    apply_events(n);
    if (n % options.record_every == 0) record();
  }
  if (final_state) *final_state = std::move(state);
  return trace;
}

void write_trace_csv(const std::string& path, const WaveformTrace& trace) {
  std::vector<std::string> header{"time_s"};
  header.insert(header.end(), trace.names.begin(), trace.names.end());
  CsvWriter w(path, header);
  std::vector<double> row(header.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    row[0] = trace.time[i];
    for (std::size_t c = 0; c < trace.columns.size(); ++c) row[c + 1] = trace.columns[c][i];
    w.row(row);
  }
  w.commit();
}

}  // namespace meb
