#pragma once

// Waveform classifier: float MLP trained with momentum SGD, 5-bit post-training
// quantization, and integer-only inference.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meb/channel.hpp"
#include "meb/kernels.hpp"

namespace meb {

inline constexpr std::size_t kMlpWindow = 300;
// Network inputs are ADC codes times this factor (12-bit full scale -> +-1).
inline constexpr double kMlpInputScale = 1.0 / 2048.0;
inline constexpr int kQMin = -16;
inline constexpr int kQMax = 15;

struct LabeledWindow {
  std::vector<std::int32_t> samples;  // kMlpWindow ADC codes
  int code = 0;
};

// Last `length` samples of a capture.
std::vector<std::int32_t> mlp_window(const RxCapture& capture, std::size_t length = kMlpWindow);

struct MlpHyper {
  std::vector<int> dims = {300, 300, 100, 25, 8};
  int epochs = 20;
  int batch = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double calib_percentile = 99.9;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FloatMlp {
  std::vector<int> dims;
  std::vector<std::vector<float>> w;  // layer l: dims[l+1] x dims[l], row-major
  std::vector<std::vector<float>> b;

  // Logits for normalized inputs.
  std::vector<float> forward(std::span<const float> x,
                             std::vector<std::vector<float>>* activations = nullptr) const;
  int classify(std::span<const std::int32_t> window) const;
};

struct QuantizedLayer {
  int in = 0;
  int out = 0;
  float weight_scale = 0.0f;
  float act_scale = 0.0f;  // scale of this layer's input
  std::vector<std::int8_t> w;
  std::vector<std::int8_t> b;  // in units of weight_scale
};

struct QuantizedMlp {
  std::vector<QuantizedLayer> layers;

  std::vector<int> dims() const;
  void validate() const;
  std::size_t packed_bytes() const;
};

struct TrainReport {
  double train_accuracy = 0.0;      // float network
  double quantized_agreement = 0.0; // integer vs float decisions on the training set
  double final_loss = 0.0;
};

struct TrainResult {
  FloatMlp float_model;
  QuantizedMlp model;
  TrainReport report;
};

TrainResult train_mlp(std::span<const LabeledWindow> dataset, const MlpHyper& hyper = {});
QuantizedMlp quantize_mlp(const FloatMlp& net, std::span<const LabeledWindow> calibration,
                          double percentile = 99.9);

struct MlpOutput {
  int code = 0;
  std::vector<std::int32_t> logits;
};

// Integer parameters derived once from a QuantizedMlp.
class IntegerMlp {
 public:
  explicit IntegerMlp(const QuantizedMlp& model);

  // Forward pass on the given kernel table.
  MlpOutput infer(std::span<const std::int32_t> window, const kernels::KernelTable& k) const;
  MlpOutput infer(std::span<const std::int32_t> window) const { return infer(window, kernels::active()); }
  // Plain nested loops, independent of the kernel tables.
  MlpOutput infer_reference(std::span<const std::int32_t> window) const;

 private:
  struct Requant {
    std::int64_t mult = 0;  // fixed-point multiplier in [2^30, 2^31), or 0
    int shift = 1;
  };
  struct Layer {
    int in = 0, out = 0;
    std::vector<std::int8_t> w;
    std::vector<std::int32_t> bias_acc;
    Requant to_next;  // unused on the last layer
  };

  void check_window(std::span<const std::int32_t> window) const;
  std::int8_t quantize_input(std::int32_t code) const;

  Requant input_;
  std::vector<Layer> layers_;
};

MlpOutput mlp_infer(const QuantizedMlp& model, std::span<const std::int32_t> window);

// MEQ1 binary model.
std::vector<std::uint8_t> serialize_mlp(const QuantizedMlp& model);
QuantizedMlp deserialize_mlp(std::span<const std::uint8_t> bytes);
void write_mlp(const std::string& path, const QuantizedMlp& model);
QuantizedMlp read_mlp(const std::string& path);

// 5-bit two's-complement, LSB-first bit packing.
std::vector<std::uint8_t> pack5(std::span<const std::int8_t> values);
std::vector<std::int8_t> unpack5(std::span<const std::uint8_t> bytes, std::size_t count);

// Dataset directory: one capture CSV per window plus labels.csv (`file,code`).
void write_dataset(const std::string& dir, std::span<const RxCapture> captures,
                   std::span<const int> codes);
std::vector<LabeledWindow> read_dataset(const std::string& dir);

}  // namespace meb
