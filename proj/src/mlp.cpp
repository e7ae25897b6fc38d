#include "meb/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "meb/csv.hpp"

namespace meb {

std::vector<std::int32_t> mlp_window(const RxCapture& capture, std::size_t length) {
  if (capture.samples.size() < length) {
    fail(ErrorKind::input, "mlp window: capture has " + std::to_string(capture.samples.size()) +
                               " samples, need " + std::to_string(length));
  }
  return {capture.samples.end() - static_cast<std::ptrdiff_t>(length), capture.samples.end()};
}

void MlpHyper::validate() const {
  if (dims.size() < 2) fail(ErrorKind::config, "mlp: need at least one layer");
  if (dims.front() != static_cast<int>(kMlpWindow)) {
    fail(ErrorKind::config, "mlp: input dimension must be " + std::to_string(kMlpWindow));
  }
  for (int d : dims) {
    if (d < 1 || d > 65535) fail(ErrorKind::config, "mlp: layer width must be in 1..65535");
  }
  if (epochs < 1 || batch < 1) fail(ErrorKind::config, "mlp: epochs and batch must be >= 1");
  if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    fail(ErrorKind::config, "mlp: learning_rate > 0 and momentum in [0,1) required");
  }
  if (!(calib_percentile > 0.0 && calib_percentile <= 100.0)) {
    fail(ErrorKind::config, "mlp: calib_percentile must be in (0,100]");
  }
}

namespace {

std::vector<float> normalize(std::span<const std::int32_t> window) {
  std::vector<float> x(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    x[i] = static_cast<float>(window[i] * kMlpInputScale);
  }
  return x;
}

int argmax(std::span<const float> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_dataset(std::span<const LabeledWindow> data, int n_classes) {
  if (data.empty()) fail(ErrorKind::input, "mlp: empty dataset");
  for (const auto& s : data) {
    if (s.samples.size() != kMlpWindow) {
      fail(ErrorKind::input, "mlp: window length " + std::to_string(s.samples.size()) + ", expected " +
                                 std::to_string(kMlpWindow));
    }
    if (s.code < 0 || s.code >= n_classes) fail(ErrorKind::input, "mlp: label out of range");
  }
}

double percentile(std::vector<float>& v, double p) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size()))) ;
  const auto idx = std::min(v.size() - 1, k == 0 ? 0 : k - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

std::int8_t clamp_q(double x) {
  return static_cast<std::int8_t>(std::clamp(std::nearbyint(x), double{kQMin}, double{kQMax}));
}

}  // namespace

std::vector<float> FloatMlp::forward(std::span<const float> x,
                                     std::vector<std::vector<float>>* activations) const {
  const auto& k = kernels::active();
  std::vector<float> a(x.begin(), x.end());
  if (activations) activations->assign(1, a);
  const std::size_t n_layers = w.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto out = static_cast<std::size_t>(dims[l + 1]);
    std::vector<float> z(out);
    for (std::size_t r = 0; r < out; ++r) z[r] = k.dot_f32(w[l].data() + r * in, a.data(), in) + b[l][r];
    if (l + 1 < n_layers) {
      for (auto& v : z) v = std::max(v, 0.0f);
    }
    a = std::move(z);
    if (activations) activations->push_back(a);
  }
  return a;
}

int FloatMlp::classify(std::span<const std::int32_t> window) const {
  const auto x = normalize(window);
  const auto logits = forward(x);
  return argmax(logits);
}

std::vector<int> QuantizedMlp::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in);
  for (const auto& l : layers) d.push_back(l.out);
  return d;
}

void QuantizedMlp::validate() const {
  if (layers.empty()) fail(ErrorKind::input, "quantized mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in < 1 || l.out < 1) fail(ErrorKind::input, "quantized mlp: empty layer");
    if (i > 0 && l.in != layers[i - 1].out) fail(ErrorKind::input, "quantized mlp: layer widths do not chain");
    if (l.w.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
        l.b.size() != static_cast<std::size_t>(l.out)) {
      fail(ErrorKind::input, "quantized mlp: parameter count mismatch");
    }
    if (!(l.weight_scale > 0.0f) || !(l.act_scale > 0.0f) || !std::isfinite(l.weight_scale) ||
        !std::isfinite(l.act_scale)) {
      fail(ErrorKind::input, "quantized mlp: scales must be positive and finite");
    }
    auto in_range = [](std::int8_t v) { return v >= kQMin && v <= kQMax; };
    if (!std::all_of(l.w.begin(), l.w.end(), in_range) || !std::all_of(l.b.begin(), l.b.end(), in_range)) {
      fail(ErrorKind::input, "quantized mlp: stored integer outside [-16, 15]");
    }
  }
  if (layers.front().in != static_cast<int>(kMlpWindow)) {
    fail(ErrorKind::input, "quantized mlp: input width must be " + std::to_string(kMlpWindow));
  }
}

std::size_t QuantizedMlp::packed_bytes() const {
  std::size_t n = 5;
  for (const auto& l : layers) n += 12 + (l.w.size() * 5 + 7) / 8 + (l.b.size() * 5 + 7) / 8;
  return n;
}

// ---------------------------------------------------------------- training

QuantizedMlp quantize_mlp(const FloatMlp& net, std::span<const LabeledWindow> calibration,
                          double pct) {
  const std::size_t n_layers = net.w.size();
  check_dataset(calibration, net.dims.back());
  // Activation statistics: |input| and each hidden post-ReLU output.
  std::vector<std::vector<float>> stats(n_layers);
  std::vector<std::vector<float>> acts;
  for (const auto& s : calibration) {
    const auto x = normalize(s.samples);
    net.forward(x, &acts);
    for (float v : acts[0]) stats[0].push_back(std::abs(v));
    for (std::size_t l = 1; l < n_layers; ++l) stats[l].insert(stats[l].end(), acts[l].begin(), acts[l].end());
  }
  QuantizedMlp q;
  for (std::size_t l = 0; l < n_layers; ++l) {
    QuantizedLayer ql;
    ql.in = net.dims[l];
    ql.out = net.dims[l + 1];
    double levels = l == 0 ? double{kQMax} : double{kQMax - kQMin};
    double a = percentile(stats[l], pct);
    if (!(a > 0.0)) a = *std::max_element(stats[l].begin(), stats[l].end());
    if (!(a > 0.0)) a = 1.0;
    ql.act_scale = static_cast<float>(a / levels);

    double m = 0.0;
    for (float v : net.w[l]) m = std::max(m, std::abs(static_cast<double>(v)));
    for (float v : net.b[l]) m = std::max(m, std::abs(static_cast<double>(v)));
    if (!(m > 0.0)) m = 1.0;
    ql.weight_scale = static_cast<float>(m / kQMax);
    const double sw = ql.weight_scale;
    ql.w.reserve(net.w[l].size());
    for (float v : net.w[l]) ql.w.push_back(clamp_q(v / sw));
    for (float v : net.b[l]) ql.b.push_back(clamp_q(v / sw));
    q.layers.push_back(std::move(ql));
  }
  return q;
}

TrainResult train_mlp(std::span<const LabeledWindow> dataset, const MlpHyper& hyper) {
  hyper.validate();
  const int n_classes = hyper.dims.back();
  check_dataset(dataset, n_classes);
  const auto& k = kernels::active();
  const std::size_t n_layers = hyper.dims.size() - 1;

  std::mt19937_64 rng(hyper.seed);
  FloatMlp net;
  net.dims = hyper.dims;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto in = static_cast<std::size_t>(hyper.dims[l]);
    const auto out = static_cast<std::size_t>(hyper.dims[l + 1]);
    std::normal_distribution<float> init(0.0f, static_cast<float>(std::sqrt(2.0 / static_cast<double>(in))));
    std::vector<float> w(in * out);
    for (auto& v : w) v = init(rng);
    net.w.push_back(std::move(w));
    net.b.emplace_back(out, 0.0f);
  }

  std::vector<std::vector<float>> inputs;
  inputs.reserve(dataset.size());
  for (const auto& s : dataset) inputs.push_back(normalize(s.samples));

  auto zeros_like = [&](const std::vector<std::vector<float>>& p) {
    std::vector<std::vector<float>> z;
    for (const auto& v : p) z.emplace_back(v.size(), 0.0f);
    return z;
  };
  auto gw = zeros_like(net.w), gb = zeros_like(net.b);
  auto vw = zeros_like(net.w), vb = zeros_like(net.b);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<float>> acts;
  std::vector<float> delta, back;
  double epoch_loss = 0.0;
  const auto lr = static_cast<float>(hyper.learning_rate);
  const auto mu = static_cast<float>(hyper.momentum);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0f);
      for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0f);
      for (std::size_t s = start; s < stop; ++s) {
        const std::size_t idx = order[s];
        const auto logits = net.forward(inputs[idx], &acts);
        // Softmax cross-entropy gradient.
        const float zmax = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (float z : logits) denom += std::exp(static_cast<double>(z - zmax));
        delta.assign(logits.size(), 0.0f);
        for (std::size_t c = 0; c < logits.size(); ++c) {
          delta[c] = static_cast<float>(std::exp(static_cast<double>(logits[c] - zmax)) / denom);
        }
        const auto label = static_cast<std::size_t>(dataset[idx].code);
        epoch_loss -= std::log(std::max(1e-30, static_cast<double>(delta[label])));
        delta[label] -= 1.0f;

        for (std::size_t l = n_layers; l-- > 0;) {
          const auto in = static_cast<std::size_t>(net.dims[l]);
          const auto out = static_cast<std::size_t>(net.dims[l + 1]);
          const auto& a_in = acts[l];
          for (std::size_t r = 0; r < out; ++r) {
            if (delta[r] == 0.0f) continue;
            k.axpy_f32(delta[r], a_in.data(), gw[l].data() + r * in, in);
            gb[l][r] += delta[r];
          }
          if (l == 0) break;
          back.assign(in, 0.0f);
          for (std::size_t r = 0; r < out; ++r) {
            if (delta[r] != 0.0f) k.axpy_f32(delta[r], net.w[l].data() + r * in, back.data(), in);
          }
          for (std::size_t i = 0; i < in; ++i) {
            if (a_in[i] <= 0.0f) back[i] = 0.0f;
          }
          delta.swap(back);
        }
      }
      const float scale = -lr / static_cast<float>(stop - start);
      for (std::size_t l = 0; l < n_layers; ++l) {
        for (std::size_t i = 0; i < net.w[l].size(); ++i) {
          vw[l][i] = mu * vw[l][i] + scale * gw[l][i];
          net.w[l][i] += vw[l][i];
        }
        for (std::size_t i = 0; i < net.b[l].size(); ++i) {
          vb[l][i] = mu * vb[l][i] + scale * gb[l][i];
          net.b[l][i] += vb[l][i];
        }
      }
    }
  }

  TrainResult result;
  result.model = quantize_mlp(net, dataset, hyper.calib_percentile);
  const IntegerMlp engine(result.model);
  std::size_t correct = 0, agree = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int f = argmax(net.forward(inputs[i]));
    correct += f == dataset[i].code;
    agree += engine.infer(dataset[i].samples).code == f;
  }
  const auto n = static_cast<double>(dataset.size());
  result.report.train_accuracy = static_cast<double>(correct) / n;
  result.report.quantized_agreement = static_cast<double>(agree) / n;
  result.report.final_loss = epoch_loss / n;
  result.float_model = std::move(net);
  return result;
}

// ---------------------------------------------------------------- inference

namespace {

struct FixedPoint {
  std::int64_t mult;
  int shift;
};

FixedPoint to_fixed(double m) {
  if (!(m >= 0.0) || !std::isfinite(m)) fail(ErrorKind::input, "quantized mlp: bad requant multiplier");
  if (m == 0.0) return {0, 1};
  int e = 0;
  const double f = std::frexp(m, &e);  // m = f * 2^e, f in [0.5, 1)
  auto mult = static_cast<std::int64_t>(std::llround(f * 2147483648.0));
  int shift = 31 - e;
  if (mult == (std::int64_t{1} << 31)) {
    mult >>= 1;
    --shift;
  }
  if (shift < 1) fail(ErrorKind::input, "quantized mlp: requant multiplier too large");
  if (shift > 62) return {0, 1};
  return {mult, shift};
}

inline std::int64_t apply_fixed(std::int64_t v, std::int64_t mult, int shift) {
  return (v * mult + (std::int64_t{1} << (shift - 1))) >> shift;
}

}  // namespace

IntegerMlp::IntegerMlp(const QuantizedMlp& model) {
  model.validate();
  const auto f = to_fixed(kMlpInputScale / static_cast<double>(model.layers.front().act_scale));
  input_ = {f.mult, f.shift};
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& ql = model.layers[i];
    Layer l;
    l.in = ql.in;
    l.out = ql.out;
    l.w = ql.w;
    const double s_in = ql.act_scale;
    for (std::int8_t b : ql.b) {
      const double acc = static_cast<double>(b) / s_in;
      l.bias_acc.push_back(static_cast<std::int32_t>(std::clamp(
          std::nearbyint(acc), -1073741824.0, 1073741823.0)));
    }
    if (i + 1 < model.layers.size()) {
      const auto r = to_fixed(static_cast<double>(ql.weight_scale) * s_in /
                              static_cast<double>(model.layers[i + 1].act_scale));
      l.to_next = {r.mult, r.shift};
    }
    layers_.push_back(std::move(l));
  }
}

void IntegerMlp::check_window(std::span<const std::int32_t> window) const {
  if (window.size() != static_cast<std::size_t>(layers_.front().in)) {
    fail(ErrorKind::input, "mlp_infer: window length " + std::to_string(window.size()) + ", expected " +
                               std::to_string(layers_.front().in));
  }
}

std::int8_t IntegerMlp::quantize_input(std::int32_t code) const {
  const auto q = apply_fixed(code, input_.mult, input_.shift);
  return static_cast<std::int8_t>(std::clamp<std::int64_t>(q, kQMin, kQMax));
}

MlpOutput IntegerMlp::infer(std::span<const std::int32_t> window, const kernels::KernelTable& k) const {
  check_window(window);
  std::vector<std::int8_t> x(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) x[i] = quantize_input(window[i]);
  std::vector<std::int32_t> acc;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    acc.assign(static_cast<std::size_t>(l.out), 0);
    k.matvec_i8(l.w.data(), static_cast<std::size_t>(l.out), static_cast<std::size_t>(l.in), x.data(),
                acc.data());
    for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += l.bias_acc[r];
    if (li + 1 == layers_.size()) break;
    x.resize(acc.size());
    for (std::size_t r = 0; r < acc.size(); ++r) {
      const auto q = acc[r] > 0 ? apply_fixed(acc[r], l.to_next.mult, l.to_next.shift) : 0;
      x[r] = static_cast<std::int8_t>(std::min<std::int64_t>(q, kQMax - kQMin));
    }
  }
  MlpOutput out;
  out.code = static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
  out.logits = std::move(acc);
  return out;
}

MlpOutput IntegerMlp::infer_reference(std::span<const std::int32_t> window) const {
  check_window(window);
  std::vector<std::int64_t> a(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) a[i] = quantize_input(window[i]);
  std::vector<std::int64_t> z;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    z.assign(static_cast<std::size_t>(l.out), 0);
    for (int r = 0; r < l.out; ++r) {
      std::int64_t s = l.bias_acc[static_cast<std::size_t>(r)];
      for (int c = 0; c < l.in; ++c) {
        s += static_cast<std::int64_t>(l.w[static_cast<std::size_t>(r) * static_cast<std::size_t>(l.in) +
                                           static_cast<std::size_t>(c)]) *
             a[static_cast<std::size_t>(c)];
      }
      z[static_cast<std::size_t>(r)] = s;
    }
    if (li + 1 == layers_.size()) break;
    a.resize(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) {
      // ReLU, rescale, saturate to the unsigned 5-bit range.
      const std::int64_t relu = std::max<std::int64_t>(z[r], 0);
      const std::int64_t q = relu == 0 ? 0 : apply_fixed(relu, l.to_next.mult, l.to_next.shift);
      a[r] = std::min<std::int64_t>(q, kQMax - kQMin);
    }
  }
  MlpOutput out;
  int best = 0;
  for (std::size_t r = 0; r < z.size(); ++r) {
    out.logits.push_back(static_cast<std::int32_t>(z[r]));
    if (z[r] > z[static_cast<std::size_t>(best)]) best = static_cast<int>(r);
  }
  out.code = best;
  return out;
}

MlpOutput mlp_infer(const QuantizedMlp& model, std::span<const std::int32_t> window) {
  return IntegerMlp(model).infer(window);
}

// ---------------------------------------------------------------- MEQ1 format

std::vector<std::uint8_t> pack5(std::span<const std::int8_t> values) {
  std::vector<std::uint8_t> out((values.size() * 5 + 7) / 8, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = static_cast<unsigned>(values[i]) & 0x1fu;
    for (unsigned b = 0; b < 5; ++b) {
      const std::size_t pos = i * 5 + b;
      out[pos / 8] = static_cast<std::uint8_t>(out[pos / 8] | (((u >> b) & 1u) << (pos % 8)));
    }
  }
  return out;
}

std::vector<std::int8_t> unpack5(std::span<const std::uint8_t> bytes, std::size_t count) {
  if (bytes.size() < (count * 5 + 7) / 8) fail(ErrorKind::input, "unpack5: truncated input");
  std::vector<std::int8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned u = 0;
    for (unsigned b = 0; b < 5; ++b) {
      const std::size_t pos = i * 5 + b;
      u |= ((bytes[pos / 8] >> (pos % 8)) & 1u) << b;
    }
    out[i] = static_cast<std::int8_t>(u >= 16 ? static_cast<int>(u) - 32 : static_cast<int>(u));
  }
  return out;
}

namespace {

void put_u16(std::vector<std::uint8_t>& o, std::uint16_t v) {
  o.push_back(static_cast<std::uint8_t>(v & 0xff));
  o.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_f32(std::vector<std::uint8_t>& o, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) o.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::span<const std::uint8_t> take(std::size_t n) {
    if (b_.size() - pos_ < n) fail(ErrorKind::input, "MEQ1: truncated file");
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto s = take(2);
    return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
  }
  float f32() {
    const auto s = take(4);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(s[static_cast<std::size_t>(i)]) << (8 * i);
    return std::bit_cast<float>(u);
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_mlp(const QuantizedMlp& model) {
  model.validate();
  if (model.layers.size() > 255) fail(ErrorKind::input, "MEQ1: too many layers");
  std::vector<std::uint8_t> o = {'M', 'E', 'Q', '1'};
  o.push_back(static_cast<std::uint8_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    put_u16(o, static_cast<std::uint16_t>(l.in));
    put_u16(o, static_cast<std::uint16_t>(l.out));
    put_f32(o, l.weight_scale);
    put_f32(o, l.act_scale);
    const auto w = pack5(l.w);
    const auto b = pack5(l.b);
    o.insert(o.end(), w.begin(), w.end());
    o.insert(o.end(), b.begin(), b.end());
  }
  return o;
}

QuantizedMlp deserialize_mlp(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), "MEQ1", 4) != 0) fail(ErrorKind::input, "MEQ1: bad magic");
  QuantizedMlp m;
  const int n = r.u8();
  for (int i = 0; i < n; ++i) {
    QuantizedLayer l;
    l.in = r.u16();
    l.out = r.u16();
    l.weight_scale = r.f32();
    l.act_scale = r.f32();
    const std::size_t nw = static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out);
    l.w = unpack5(r.take((nw * 5 + 7) / 8), nw);
    const auto nb = static_cast<std::size_t>(l.out);
    l.b = unpack5(r.take((nb * 5 + 7) / 8), nb);
    m.layers.push_back(std::move(l));
  }
  if (!r.done()) fail(ErrorKind::input, "MEQ1: trailing bytes");
  m.validate();
  return m;
}

void write_mlp(const std::string& path, const QuantizedMlp& model) {
  const auto bytes = serialize_mlp(model);
  write_text_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

QuantizedMlp read_mlp(const std::string& path) {
  const auto text = read_text_file(path);
  return deserialize_mlp(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------- dataset IO

void write_dataset(const std::string& dir, std::span<const RxCapture> captures,
                   std::span<const int> codes) {
  if (captures.size() != codes.size()) fail(ErrorKind::input, "dataset: one code per capture");
  std::filesystem::create_directories(dir);
  std::ostringstream labels;
  labels << "file,code\n";
  for (std::size_t i = 0; i < captures.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "w%06zu.csv", i);
    write_capture((std::filesystem::path(dir) / name).string(), captures[i]);
    labels << name << ',' << codes[i] << '\n';
  }
  write_text_file_atomic((std::filesystem::path(dir) / "labels.csv").string(), labels.str());
}

std::vector<LabeledWindow> read_dataset(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "labels.csv";
  std::istringstream in(read_text_file(path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "file,code") {
    fail(ErrorKind::input, path.string() + ": header must be `file,code`");
  }
  std::vector<LabeledWindow> data;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorKind::input, path.string() + ":" + std::to_string(lineno) + ": missing comma");
    LabeledWindow w;
    try {
      std::size_t used = 0;
      w.code = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(lineno) + ": bad code");
    }
    const auto cap = read_capture((std::filesystem::path(dir) / line.substr(0, comma)).string());
    w.samples = mlp_window(cap);
    data.push_back(std::move(w));
  }
  if (data.empty()) fail(ErrorKind::input, path.string() + ": empty dataset");
  return data;
}

}  // namespace meb
