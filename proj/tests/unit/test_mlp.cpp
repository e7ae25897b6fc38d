#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "meb/ber.hpp"
#include "meb/mlp.hpp"
#include "support.hpp"

using namespace meb;
using meb::testing::error_kind_of;

namespace {

const LinkSimulator& link_sim() {
  static const LinkSimulator s{LinkSetup{}};
  return s;
}

// Noiseless windows of every code at 1..5 cm: 200 per class.
const std::vector<LabeledWindow>& noiseless_set() {
  static const std::vector<LabeledWindow> data = [] {
    const auto& s = link_sim();
    const std::vector<double> d{0.01, 0.02, 0.03, 0.04, 0.05};
    const auto conds = distance_conditions(s, LinkConfig{}, d, std::nullopt, 0.05);
    return synthesize_windows(s, conds, 40, 3);
  }();
  return data;
}

const TrainResult& trained() {
  static const TrainResult r = train_mlp(noiseless_set(), MlpHyper{});
  return r;
}

QuantizedMlp random_model(std::uint64_t seed, std::vector<int> dims) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> q(kQMin, kQMax);
  std::uniform_real_distribution<float> s(0.01f, 0.2f);
  QuantizedMlp m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    QuantizedLayer L;
    L.in = dims[l];
    L.out = dims[l + 1];
    L.weight_scale = s(rng);
    L.act_scale = s(rng);
    L.w.resize(static_cast<std::size_t>(L.in * L.out));
    L.b.resize(static_cast<std::size_t>(L.out));
    for (auto& v : L.w) v = static_cast<std::int8_t>(q(rng));
    for (auto& v : L.b) v = static_cast<std::int8_t>(q(rng));
    m.layers.push_back(std::move(L));
  }
  return m;
}

}  // namespace

TEST_CASE("5-bit packing") {
  const std::vector<std::int8_t> v{1, -1};
  const auto p = pack5(v);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == 0xE1);
  CHECK(p[1] == 0x03);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> q(kQMin, kQMax);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 1000u}) {
    std::vector<std::int8_t> x(n);
    for (auto& e : x) e = static_cast<std::int8_t>(q(rng));
    const auto bytes = pack5(x);
    CHECK(bytes.size() == (5 * n + 7) / 8);
    CHECK(unpack5(bytes, n) == x);
  }
  CHECK(error_kind_of([] { unpack5(std::vector<std::uint8_t>{0}, 2); }) == ErrorKind::input);
}

TEST_CASE("MEQ1 round trip and storage size") {
  const auto m = random_model(5, {300, 300, 100, 25, 8});
  CHECK_NOTHROW(m.validate());
  const auto bytes = serialize_mlp(m);
  CHECK(bytes.size() == m.packed_bytes());
  // 122,700 weights and 433 biases at 5 bits.
  CHECK(bytes.size() == doctest::Approx((122700.0 + 433.0) * 5.0 / 8.0).epsilon(2e-3));
  CHECK(bytes.size() / 1000.0 == doctest::Approx(77.0).epsilon(0.01));
  const auto back = deserialize_mlp(bytes);
  REQUIRE(back.layers.size() == 4);
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(back.layers[l].w == m.layers[l].w);
    CHECK(back.layers[l].b == m.layers[l].b);
    CHECK(back.layers[l].weight_scale == m.layers[l].weight_scale);
    CHECK(back.layers[l].act_scale == m.layers[l].act_scale);
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(error_kind_of([&] { deserialize_mlp(bad); }) == ErrorKind::input);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK(error_kind_of([&] { deserialize_mlp(cut); }) == ErrorKind::input);
  auto extra = bytes;
  extra.push_back(0);
  CHECK(error_kind_of([&] { deserialize_mlp(extra); }) == ErrorKind::input);

  meb::testing::TempDir dir("mlp_io");
  write_mlp(dir.file("m.bin"), m);
  CHECK(serialize_mlp(read_mlp(dir.file("m.bin"))) == bytes);
}

TEST_CASE("quantized model validation") {
  auto m = random_model(2, {300, 10, 8});
  m.layers[0].w[3] = 16;
  CHECK(error_kind_of([&] { m.validate(); }) == ErrorKind::input);
  m = random_model(2, {300, 10, 8});
  m.layers[1].in = 11;
  CHECK(error_kind_of([&] { m.validate(); }) == ErrorKind::input);
  m = random_model(2, {300, 10, 8});
  m.layers[0].act_scale = 0.0f;
  CHECK(error_kind_of([&] { m.validate(); }) == ErrorKind::input);
  CHECK(error_kind_of([] { random_model(2, {200, 10, 8}).validate(); }) == ErrorKind::input);
}

TEST_CASE("integer inference: kernel path, scalar path and plain loops agree") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> adc(-2047, 2047);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const IntegerMlp net(random_model(seed, {300, 300, 100, 25, 8}));
    for (int t = 0; t < 20; ++t) {
      std::vector<std::int32_t> x(kMlpWindow);
      for (auto& v : x) v = adc(rng);
      if (t == 0) std::fill(x.begin(), x.end(), 2047);
      if (t == 1) std::fill(x.begin(), x.end(), -2047);
      const auto ref = net.infer_reference(x);
      const auto sc = net.infer(x, kernels::scalar());
      CHECK(sc.logits == ref.logits);
      CHECK(sc.code == ref.code);
      if (kernels::avx2()) {
        const auto av = net.infer(x, *kernels::avx2());
        CHECK(av.logits == ref.logits);
        CHECK(av.code == ref.code);
      }
    }
  }
}

TEST_CASE("zero window and length errors") {
  const auto m = random_model(9, {300, 300, 100, 25, 8});
  const std::vector<std::int32_t> zero(kMlpWindow, 0);
  const auto a = mlp_infer(m, zero);
  const auto b = mlp_infer(m, zero);
  CHECK(a.code == b.code);
  CHECK(a.logits == b.logits);
  CHECK(a.code >= 0);
  CHECK(a.code < 8);
  CHECK(static_cast<int>(std::max_element(a.logits.begin(), a.logits.end()) - a.logits.begin()) == a.code);
  CHECK(error_kind_of([&] { mlp_infer(m, std::vector<std::int32_t>(299)); }) == ErrorKind::input);
}

TEST_CASE("windows and hyperparameters") {
  RxCapture c;
  c.samples.resize(330);
  for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i] = static_cast<std::int32_t>(i);
  const auto w = mlp_window(c);
  REQUIRE(w.size() == kMlpWindow);
  CHECK(w.front() == 30);
  CHECK(w.back() == 329);
  c.samples.resize(100);
  CHECK(error_kind_of([&] { mlp_window(c); }) == ErrorKind::input);
  MlpHyper h;
  CHECK_NOTHROW(h.validate());
  h.dims = {299, 8};
  CHECK(error_kind_of([&] { h.validate(); }) == ErrorKind::config);
  h = MlpHyper{};
  h.momentum = 1.0;
  CHECK(error_kind_of([&] { h.validate(); }) == ErrorKind::config);
  CHECK(error_kind_of([] { train_mlp({}, MlpHyper{}); }) == ErrorKind::input);
  std::vector<LabeledWindow> bad{{std::vector<std::int32_t>(kMlpWindow, 0), 9}};
  CHECK(error_kind_of([&] { train_mlp(bad, MlpHyper{}); }) == ErrorKind::input);
}

TEST_CASE("training on noiseless simulated windows") {
  const auto& data = noiseless_set();
  REQUIRE(data.size() == 8 * 200);
  const auto& r = trained();
  CHECK(r.report.train_accuracy == 1.0);
  CHECK(r.report.quantized_agreement >= 0.99);
  const IntegerMlp net(r.model);
  std::size_t correct = 0;
  for (const auto& w : data) correct += net.infer(w.samples).code == w.code;
  CHECK(correct == data.size());
  for (const auto& l : r.model.layers) {
    for (auto v : l.w) CHECK((v >= kQMin && v <= kQMax));
  }
}

TEST_CASE("training is deterministic per seed") {
  std::vector<LabeledWindow> small(noiseless_set().begin(), noiseless_set().begin() + 160);
  MlpHyper h;
  h.dims = {300, 16, 8};
  h.epochs = 3;
  const auto a = train_mlp(small, h);
  const auto b = train_mlp(small, h);
  CHECK(serialize_mlp(a.model) == serialize_mlp(b.model));
  h.seed = 2;
  CHECK(serialize_mlp(train_mlp(small, h).model) != serialize_mlp(a.model));
}

TEST_CASE("dataset directory round trip") {
  meb::testing::TempDir dir("mlp_dataset");
  const auto& s = link_sim();
  std::vector<RxCapture> caps;
  std::vector<int> codes;
  LinkConfig cfg = s.with_auto_gain(LinkConfig{});
  cfg.noise_rms = 0.001;
  for (int code = 0; code < 8; ++code) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(code));
    caps.push_back(s.capture(code, cfg, rng));
    codes.push_back(code);
  }
  write_dataset(dir.str(), caps, codes);
  const auto back = read_dataset(dir.str());
  REQUIRE(back.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(back[i].code == codes[i]);
    CHECK(back[i].samples == mlp_window(caps[i]));
  }
  CHECK(error_kind_of([&] { write_dataset(dir.str(), caps, std::vector<int>{1}); }) == ErrorKind::input);
}
