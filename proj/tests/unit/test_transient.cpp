#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "meb/transient.hpp"
#include "support.hpp"

using namespace meb;
using meb::testing::error_kind_of;

namespace {

Circuit bare(std::size_t order) { return {reference_model(order), {}}; }

// Rising zero crossings by linear interpolation.
std::vector<double> rising_crossings(const WaveformTrace& tr, const std::string& probe) {
  const auto v = tr.column(probe);
  std::vector<double> out;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i - 1] < 0.0 && v[i] >= 0.0) {
      out.push_back(tr.time[i - 1] + (tr.time[i] - tr.time[i - 1]) * (-v[i - 1]) / (v[i] - v[i - 1]));
    }
  }
  return out;
}

// Half peak-to-peak of v_cp over [t, t + period).
double cycle_amplitude_probe(const WaveformTrace& tr, double t, double period) {
  const auto v = tr.column("v_cp");
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (tr.time[i] < t || tr.time[i] >= t + period) continue;
    lo = any ? std::min(lo, v[i]) : v[i];
    hi = any ? std::max(hi, v[i]) : v[i];
    any = true;
  }
  REQUIRE(any);
  return 0.5 * (hi - lo);
}

// Energy stored as branch-0 current: unlike a charged compliance this rings
// with no DC offset on c_p.
CircuitState charged_compliance(const Circuit& c, double v) {
  auto s = init_state(c.model, c.n_fly());
  const auto& b = c.model.branches()[0];
  s.i_l[0] = v * std::sqrt(b.c_m / b.l_m);
  return s;
}

}  // namespace

TEST_CASE("init_state and total_energy") {
  const auto m = reference_model(3);
  const auto s = init_state(m, 4);
  CHECK(s.t == 0.0);
  CHECK(s.v_cp == 0.0);
  CHECK(s.i_l.size() == 3);
  CHECK(s.v_fly.size() == 4);
  CHECK(init_state(m, 0).v_fly.empty());
  const Circuit c{m, std::vector<double>(4, 3e-10)};
  CHECK(total_energy(s, c) == 0.0);
  auto one = s;
  one.v_cp = 1.0;
  CHECK(total_energy(one, c) == doctest::Approx(0.5e-9).epsilon(1e-12));
}

TEST_CASE("equilibrium is preserved") {
  const auto m = reference_model(3);
  auto s = init_state(m, 0);
  for (int i = 0; i < 100; ++i) s = step(m, s, default_step(m), DriveConfig::off());
  CHECK(s.v_cp == 0.0);
  for (double x : s.i_l) CHECK(x == 0.0);
  for (double x : s.v_c) CHECK(x == 0.0);
}

TEST_CASE("step rejects dt above T0/100") {
  const auto m = reference_model(1);
  const auto s = init_state(m, 0);
  CHECK(error_kind_of([&] { step(m, s, 1.01 * max_step(m), DriveConfig::off()); }) == ErrorKind::config);
  CHECK(error_kind_of([&] { step(m, s, 0.0, DriveConfig::off()); }) == ErrorKind::config);
  CHECK_NOTHROW(step(m, s, max_step(m), DriveConfig::off()));
}

TEST_CASE("open-terminal ringdown frequency and decay") {
  const auto c = bare(1);
  const auto s0 = charged_compliance(c, 1.0);
  const auto f_oc = resonance_frequencies(c.model)[0].f_oc;
  RunOptions opt;
  opt.t_end = 60.0 / f_oc;
  const auto tr = run(c, DriveConfig::off(), {}, opt, &s0);
  const auto zc = rising_crossings(tr, "v_cp");
  REQUIRE(zc.size() > 40);
  const double period = (zc.back() - zc[5]) / static_cast<double>(zc.size() - 6);
  CHECK(std::abs(period * f_oc - 1.0) < 1e-3);

  // Series RLC with c_m in series with c_p: Q_oc = sqrt(L/C_s)/R.
  const auto& b = c.model.branches()[0];
  const double c_s = b.c_m * c.model.c_p() / (b.c_m + c.model.c_p());
  const double q_oc = std::sqrt(b.l_m / c_s) / b.r_m;
  const double a1 = cycle_amplitude_probe(tr, zc[10], period);
  const double a2 = cycle_amplitude_probe(tr, zc[30], period);
  const double per_cycle = std::pow(a2 / a1, 1.0 / 20.0);
  CHECK(per_cycle == doctest::Approx(std::exp(-kPi / q_oc)).epsilon(2e-4));
  // Against the nominal Q = 150 the decrement agrees within 5%.
  CHECK((1.0 - per_cycle) == doctest::Approx(1.0 - std::exp(-kPi / 150.0)).epsilon(0.05));
}

TEST_CASE("charge sharing examples") {
  const Circuit c{TransducerModel(1e-9, {ResonanceBranch::from_resonance(331e3, 150, 50)}), {300e-12}};
  auto s = init_state(c.model, 1);
  s.v_cp = 2.0;
  const auto r = apply_charge_share(c, s, SwitchEvent::connect(0.0, 0, +1));
  CHECK(r.state.v_cp == doctest::Approx(1.538).epsilon(3e-4));
  CHECK(r.state.v_fly[0] == doctest::Approx(2.0 / 1.3).epsilon(1e-12));
  CHECK(1e-9 * r.state.v_cp + 300e-12 * r.state.v_fly[0] == doctest::Approx(2e-9).epsilon(1e-12));
  CHECK(r.e_loss == doctest::Approx(0.462e-9).epsilon(1e-3));

  SUBCASE("equal voltages: no change") {
    auto e = s;
    e.v_fly[0] = 2.0;
    const auto q = apply_charge_share(c, e, SwitchEvent::connect(0.0, 0, +1));
    CHECK(q.state.v_cp == 2.0);
    CHECK(q.e_loss == 0.0);
  }
  SUBCASE("negative polarity sees the fly voltage inverted") {
    auto e = s;
    e.v_fly[0] = -2.0;
    const auto q = apply_charge_share(c, e, SwitchEvent::connect(0.0, 0, -1));
    CHECK(q.state.v_cp == doctest::Approx(2.0));
    CHECK(q.e_loss == doctest::Approx(0.0).epsilon(1e-20));
  }
  SUBCASE("short") {
    auto e = s;
    e.v_cp = 1.0;
    const auto q = apply_charge_share(c, e, SwitchEvent::short_terminal(0.0));
    CHECK(q.state.v_cp == 0.0);
    CHECK(q.e_loss == doctest::Approx(0.5e-9).epsilon(1e-12));
  }
  SUBCASE("branch state untouched") {
    auto e = s;
    e.i_l[0] = 1e-3;
    e.v_c[0] = 0.7;
    const auto q = apply_charge_share(c, e, SwitchEvent::connect(0.0, 0, +1));
    CHECK(q.state.i_l[0] == 1e-3);
    CHECK(q.state.v_c[0] == 0.7);
  }
  SUBCASE("errors") {
    CHECK(error_kind_of([&] { apply_charge_share(c, s, SwitchEvent::connect(0.0, 1, +1)); }) ==
          ErrorKind::input);
    CHECK(error_kind_of([&] { apply_charge_share(c, s, SwitchEvent::connect(0.0, 0, 2)); }) ==
          ErrorKind::input);
  }
}

TEST_CASE("charge conservation and exact event loss on random states") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Circuit c{reference_model(1), {1e-10, 2e-10, 4e-10}};
  for (int trial = 0; trial < 1000; ++trial) {
    auto s = init_state(c.model, 3);
    s.v_cp = u(rng);
    for (auto& v : s.v_fly) v = u(rng);
    const std::size_t k = static_cast<std::size_t>(trial % 3);
    const int pol = trial % 2 ? 1 : -1;
    const auto r = apply_charge_share(c, s, SwitchEvent::connect(0.0, k, pol));
    const double q0 = c.model.c_p() * s.v_cp + c.c_fly[k] * pol * s.v_fly[k];
    const double q1 = c.model.c_p() * r.state.v_cp + c.c_fly[k] * pol * r.state.v_fly[k];
    CHECK(std::abs(q1 - q0) <= 1e-9 * (std::abs(q0) + 1e-12));
    const double de = total_energy(s, c) - total_energy(r.state, c);
    CHECK(r.e_loss >= 0.0);
    CHECK(std::abs(de - r.e_loss) <= 1e-9 * total_energy(s, c));
  }
}

TEST_CASE("passivity and energy audit") {
  const Circuit c{reference_model(3), {3e-10, 3e-10}};
  auto s0 = charged_compliance(c, 2.0);
  s0.v_cp = 0.3;
  RunOptions opt;
  opt.t_end = 40.0 / 331e3;
  opt.probes = {"v_cp", "energy"};
  std::vector<SwitchEvent> sched{SwitchEvent::connect(10e-6, 0, 1), SwitchEvent::short_terminal(20e-6),
                                 SwitchEvent::connect(30e-6, 1, -1)};
  CircuitState end;
  const auto tr = run(c, DriveConfig::off(), sched, opt, &s0, &end);
  const auto e = tr.column("energy");
  for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i] <= e[i - 1] * (1.0 + 1e-12));
  const double e0 = total_energy(s0, c);
  const double audit = e0 - total_energy(end, c) - tr.resistive_loss - tr.event_loss;
  CHECK(std::abs(audit) < 1e-9 * e0);
  CHECK(tr.event_loss > 0.0);
  CHECK(tr.max_event_snap_error <= 0.5 * tr.dt * (1.0 + 1e-9));
}

TEST_CASE("driven energy audit includes source work") {
  const Circuit c = bare(3);
  const double f = ringdown_frequency(c.model);
  DriveConfig drive{1.0, f, 0.0, 10.0 / f};
  RunOptions opt;
  opt.t_end = 15.0 / f;
  CircuitState end;
  const auto tr = run(c, drive, {}, opt, nullptr, &end);
  CHECK(tr.source_work > 0.0);
  const double audit = tr.source_work - total_energy(end, c) - tr.resistive_loss;
  CHECK(std::abs(audit) < 1e-6 * tr.source_work);
}

TEST_CASE("drive envelope grows then decays") {
  const Circuit c = bare(3);
  const double f = ringdown_frequency(c.model);
  const double period = 1.0 / f;
  DriveConfig drive{1.0, f, 0.0, 24.0 * period};
  RunOptions opt;
  opt.t_end = 40.0 * period;
  const auto tr = run(c, drive, {}, opt);
  double prev = 0.0;
  for (int k = 0; k < 24; ++k) {
    const double a = cycle_amplitude_probe(tr, k * period, period);
    CHECK(a > prev);
    prev = a;
  }
  prev = cycle_amplitude_probe(tr, 25.0 * period, period);
  for (int k = 26; k < 39; ++k) {
    const double a = cycle_amplitude_probe(tr, k * period, period);
    CHECK(a < prev);
    prev = a;
  }
}

TEST_CASE("short during ringdown leaves energy in the resonator") {
  const Circuit c = bare(1);
  const auto s0 = charged_compliance(c, 2.0);
  const double period = 1.0 / resonance_frequencies(c.model)[0].f_oc;
  const double t_short = 10.25 * period;
  std::vector<SwitchEvent> sched{SwitchEvent::short_terminal(t_short)};
  RunOptions opt;
  opt.t_end = 20.0 * period;
  const auto tr = run(c, DriveConfig::off(), sched, opt, &s0);
  const double before = cycle_amplitude_probe(tr, t_short - period, period);
  const double after = cycle_amplitude_probe(tr, t_short + period, period);
  CHECK(after > 0.25 * before);
  // v_cp is zero right after the event boundary.
  const auto v = tr.column("v_cp");
  const auto idx = static_cast<std::size_t>(std::llround(t_short / tr.dt));
  CHECK(v[idx] == 0.0);
}

TEST_CASE("determinism and step convergence") {
  const Circuit c{reference_model(3), {3e-10, 3e-10, 3e-10, 3e-10}};
  const double f = ringdown_frequency(c.model);
  const double period = 1.0 / f;
  DriveConfig drive{1.0, f, 0.0, 10.0 * period};
  std::vector<SwitchEvent> sched;
  for (std::size_t k = 0; k < 4; ++k) sched.push_back(SwitchEvent::connect(12.0 * period, k, 1));
  RunOptions opt;
  opt.t_end = 20.0 * period;
  opt.probes = {"v_cp", "i_l0", "v_fly2"};
  const auto a = run(c, drive, sched, opt);
  const auto b = run(c, drive, sched, opt);
  CHECK(a.time == b.time);
  CHECK(a.columns == b.columns);

  RunOptions half = opt;
  half.dt = 0.5 * default_step(c.model);
  const auto h = run(c, drive, sched, half);
  const double ea = cycle_amplitude_probe(a, 19.0 * period - a.dt, period);
  const double eh = cycle_amplitude_probe(h, 19.0 * period - a.dt, period);
  CHECK(std::abs(ea / eh - 1.0) < 0.01);
}

TEST_CASE("run input validation and probes") {
  const Circuit c{reference_model(3), {3e-10}};
  RunOptions opt;
  opt.t_end = 1e-6;
  CHECK(error_kind_of([&] {
          std::vector<SwitchEvent> bad{SwitchEvent::open_all(2e-7), SwitchEvent::open_all(1e-7)};
          run(c, DriveConfig::off(), bad, opt);
        }) == ErrorKind::input);
  RunOptions zero = opt;
  zero.t_end = 0.0;
  CHECK(error_kind_of([&] { run(c, DriveConfig::off(), {}, zero); }) == ErrorKind::input);
  for (const char* p : {"i_l3", "v_fly1", "volts", "i_lx"}) {
    RunOptions o = opt;
    o.probes = {p};
    CHECK(error_kind_of([&] { run(c, DriveConfig::off(), {}, o); }) == ErrorKind::input);
  }
  RunOptions o = opt;
  o.probes = {"i_l2", "v_c1", "v_fly0", "energy", "e_mech"};
  o.record_every = 4;
  const auto tr = run(c, DriveConfig::off(), {}, o);
  CHECK(tr.names.front() == "v_cp");
  CHECK(tr.names.size() == 6);
  CHECK(tr.sample_interval == doctest::Approx(4.0 * tr.dt));
  CHECK(tr.has("e_mech"));
  CHECK(error_kind_of([&] { tr.column("nope"); }) == ErrorKind::input);
}

TEST_CASE("trace CSV") {
  meb::testing::TempDir dir("transient_csv");
  const Circuit c = bare(1);
  const auto s0 = charged_compliance(c, 1.0);
  RunOptions opt;
  opt.t_end = 1e-6;
  opt.probes = {"v_cp", "i_l0"};
  const auto tr = run(c, DriveConfig::off(), {}, opt, &s0);
  write_trace_csv(dir.file("w.csv"), tr);
  std::ifstream in(dir.file("w.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "time_s,v_cp,i_l0");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) rows += !line.empty();
  CHECK(rows == tr.size());
}
