#include <doctest.h>

#include <cmath>
#include <fstream>

#include "meb/channel.hpp"
#include "meb/transducer.hpp"
#include "support.hpp"

using namespace meb;
using meb::testing::error_kind_of;

namespace {

Waveform sine(double f, double amp, double fs, std::size_t n) {
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) {
    w.time.push_back(static_cast<double>(i) / fs);
    w.value.push_back(amp * std::sin(2.0 * kPi * f * w.time.back()));
  }
  return w;
}

}  // namespace

TEST_CASE("cubic distance law") {
  const std::vector<double> t{0.0, 1e-6, 2e-6};
  const std::vector<double> i{1e-3, -2e-3, 0.5e-3};
  LinkConfig a;
  a.distance = 0.02;
  a.k0 = 100.0;
  LinkConfig b = a;
  b.distance = 0.04;
  const auto wa = backscatter_signal(t, i, a);
  const auto wb = backscatter_signal(t, i, b);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(wb.value[k] == doctest::Approx(wa.value[k] / 8.0).epsilon(1e-12));
    CHECK(wa.value[k] == doctest::Approx(100.0 * 0.125 * i[k]).epsilon(1e-12));
  }
  const std::vector<double> z(3, 0.0);
  for (double v : backscatter_signal(t, z, a).value) CHECK(v == 0.0);
  CHECK(error_kind_of([&] { backscatter_signal(t, std::span<const double>(i).first(2), a); }) ==
        ErrorKind::input);
}

TEST_CASE("ideal quantizer and saturation") {
  LinkConfig cfg;
  cfg.adc_bits = 12;
  cfg.adc_range = 2.0;
  const auto w = sine(331e3, 0.9, 2e6, 4000);
  const auto cap = receive(w, cfg, 0.0);
  REQUIRE(cap.samples.size() == w.value.size());
  for (std::size_t n = 0; n < cap.samples.size(); ++n) {
    CHECK(std::abs(cap.samples[n] * cfg.lsb() - w.value[n]) <= 0.5 * cfg.lsb() * (1.0 + 1e-9));
  }
  CHECK(cap.saturated == 0);
  CHECK(cap.fs == 2e6);

  const auto loud = receive(sine(331e3, 3.0, 2e6, 4000), cfg, 0.0);
  CHECK(*std::max_element(loud.samples.begin(), loud.samples.end()) == 2047);
  CHECK(*std::min_element(loud.samples.begin(), loud.samples.end()) == -2047);
  CHECK(loud.saturated > 0);
}

TEST_CASE("linearity") {
  LinkConfig cfg;
  cfg.adc_bits = 14;
  const auto w = sine(331e3, 0.2, 2e6, 2000);
  auto w3 = w;
  for (auto& v : w3.value) v *= 3.0;
  const auto a = receive(w, cfg, 0.0);
  const auto b = receive(w3, cfg, 0.0);
  for (std::size_t n = 0; n < a.samples.size(); ++n) CHECK(std::abs(b.samples[n] - 3 * a.samples[n]) <= 1);
}

TEST_CASE("noise statistics and determinism") {
  LinkConfig cfg;
  cfg.adc_bits = 20;
  cfg.adc_range = 4.0;
  cfg.noise_rms = 0.1;
  cfg.seed = 42;
  const Waveform zero{std::vector<double>(200000), std::vector<double>(200000, 0.0)};
  Waveform w = zero;
  for (std::size_t i = 0; i < w.time.size(); ++i) w.time[i] = static_cast<double>(i) / cfg.adc_fs;
  const auto a = receive(w, cfg, 0.0);
  double s2 = 0.0;
  for (auto c : a.samples) s2 += (c * cfg.lsb()) * (c * cfg.lsb());
  s2 /= static_cast<double>(a.samples.size());
  CHECK(s2 == doctest::Approx(0.01).epsilon(0.05));
  const auto b = receive(w, cfg, 0.0);
  CHECK(a.samples == b.samples);
  cfg.seed = 43;
  CHECK(receive(w, cfg, 0.0).samples != a.samples);
}

TEST_CASE("trigger index and resampling") {
  const auto w = sine(100e3, 1.0, 20e6, 2001);
  const auto r = resample(w, 2e6, 0.0);
  CHECK(r.size() == 201);
  for (std::size_t n = 0; n < r.size(); ++n) {
    CHECK(r[n] == doctest::Approx(std::sin(2.0 * kPi * 100e3 * n / 2e6)).epsilon(1e-3).scale(1.0));
  }
  LinkConfig cfg;
  CHECK(receive(w, cfg, 10.2e-6).trigger_index == 21);
  CHECK(receive(w, cfg, 10e-6).trigger_index == 20);
}

TEST_CASE("snr arithmetic") {
  CHECK(measure_snr(1.0, 0.285) == doctest::Approx(10.9).epsilon(1e-3));
  CHECK(measure_snr(0.3, 0.3) == doctest::Approx(0.0));
  CHECK(measure_snr(10.0, 1.0) == doctest::Approx(20.0));
  CHECK(error_kind_of([] { measure_snr(0.0, 1.0); }) == ErrorKind::domain);
  CHECK(error_kind_of([] { measure_snr(1.0, 0.0); }) == ErrorKind::domain);
}

TEST_CASE("link config validation") {
  LinkConfig c;
  CHECK_NOTHROW(c.validate(331e3));
  auto bad = c;
  bad.distance = 0.0;
  CHECK(error_kind_of([&] { bad.validate(); }) == ErrorKind::config);
  bad = c;
  bad.adc_fs = 600e3;
  CHECK(error_kind_of([&] { bad.validate(331e3); }) == ErrorKind::config);
  bad = c;
  bad.adc_bits = 0;
  CHECK(error_kind_of([&] { bad.validate(); }) == ErrorKind::config);
  CHECK(c.max_code() == 2047);
}

TEST_CASE("capture CSV round trip") {
  meb::testing::TempDir dir("channel_io");
  LinkConfig cfg;
  cfg.noise_rms = 0.01;
  auto cap = receive(sine(331e3, 0.5, 2e6, 300), cfg, 40e-6);
  write_capture(dir.file("c.csv"), cap, &cfg);
  const auto back = read_capture(dir.file("c.csv"));
  CHECK(back.samples == cap.samples);
  CHECK(back.fs == cap.fs);
  CHECK(back.trigger_index == cap.trigger_index);
  std::ofstream(dir.file("c.json")) << "{}";
  CHECK(error_kind_of([&] { read_capture(dir.file("c.csv")); }) == ErrorKind::input);
}
