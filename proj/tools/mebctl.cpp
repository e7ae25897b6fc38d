// mebctl: command-line front end for impedance fitting, frame simulation,
// the PWM uplink and the recording stream.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "meb/ber.hpp"
#include "meb/config.hpp"
#include "meb/csv.hpp"
#include "meb/link.hpp"
#include "meb/mlp.hpp"
#include "meb/recording.hpp"
#include "meb/transducer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meb;

namespace {

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_config("{}") : load_config(path);
}

json model_json(const TransducerModel& m) { return json::parse(model_to_json_text(m)); }

std::vector<std::uint8_t> parse_bits_arg(const std::string& arg, std::size_t& n_bytes) {
  std::string bytes;
  if (fs::exists(arg)) {
    bytes = read_text_file(arg);
  } else {
    std::string hex = arg;
    if (hex.rfind("0x", 0) == 0 || hex.rfind("0X", 0) == 0) hex = hex.substr(2);
    if (hex.empty() || hex.size() % 2 != 0) fail(ErrorKind::input, "--bits: not a file and not an even-length hex string");
    for (std::size_t i = 0; i < hex.size(); i += 2) {
      unsigned v = 0;
      if (std::sscanf(hex.substr(i, 2).c_str(), "%2x", &v) != 1 ||
          !std::isxdigit(static_cast<unsigned char>(hex[i])) || !std::isxdigit(static_cast<unsigned char>(hex[i + 1]))) {
        fail(ErrorKind::input, "--bits: bad hex digit");
      }
      bytes.push_back(static_cast<char>(v));
    }
  }
  n_bytes = bytes.size();
  return bytes_to_bits(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string bits_to_hex(const std::vector<std::uint8_t>& bits) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bits.size(); i += 8) {
    unsigned v = 0;
    for (std::size_t b = 0; b < 8; ++b) v = (v << 1) | (i + b < bits.size() ? bits[i + b] : 0u);
    out += digits[(v >> 4) & 0xf];
    out += digits[v & 0xf];
  }
  return out;
}

std::string frame_name(std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05zu.csv", i);
  return name;
}

// --------------------------------------------------------------- commands

int cmd_fit(const std::string& input, int order, const std::string& out, double phase_weight) {
  const auto samples = read_impedance_csv(input);
  FitOptions opt;
  opt.phase_weight = phase_weight;
  try {
    const auto r = fit_impedance(samples, static_cast<std::size_t>(order), opt);
    write_model_json(out, r.model);
    print({{"residual", r.residual}, {"iterations", r.iterations}, {"model", model_json(r.model)}, {"out", out}});
    return 0;
  } catch (const FitNotConverged& e) {
    write_model_json(out, e.best());
    throw;
  }
}

int cmd_synth_impedance(int order, const std::string& model_path, double f_lo, double f_hi,
                        std::size_t points, const std::string& out) {
  const auto model = model_path.empty() ? reference_model(static_cast<std::size_t>(order)) : read_model_json(model_path);
  write_impedance_csv(out, sweep_impedance(model, f_lo, f_hi, points));
  print({{"points", points}, {"out", out}, {"model", model_json(model)}});
  return 0;
}

int cmd_simulate(const std::string& model_path, const std::string& config_path, int code,
                 const std::string& out_dir) {
  auto cfg = config_or_default(config_path);
  if (!model_path.empty()) cfg.setup.model = read_model_json(model_path);
  const LinkSimulator sim(cfg.setup);
  std::vector<std::string> probes = {"v_cp"};
  for (std::size_t k = 0; k < cfg.setup.model.order(); ++k) probes.push_back("i_l" + std::to_string(k));
  probes.push_back("energy");
  probes.push_back("e_mech");
  const auto f = sim.simulate_frame(code, probes);
  fs::create_directories(out_dir);
  write_trace_csv((fs::path(out_dir) / "waveform.csv").string(), f.trace);
  write_text_file_atomic((fs::path(out_dir) / "schedule.json").string(), schedule_to_json_text(f.schedule) + "\n");
  json j = {{"code", code},
            {"f_carrier_hz", sim.carrier_frequency()},
            {"tdc", {{"d_cyc", sim.tdc_code().d_cyc}, {"d_stg", sim.tdc_code().d_stg}}},
            {"flips", f.schedule.flip_times.size()},
            {"event_loss_j", f.trace.event_loss},
            {"resistive_loss_j", f.trace.resistive_loss},
            {"source_work_j", f.trace.source_work},
            {"out", out_dir}};
  if (f.trigger_cycle) {
    const double T = sim.carrier_period();
    j["trigger_cycle"] = *f.trigger_cycle;
    j["zc_time_s"] = f.zc_time;
    j["reduction_i_l0"] = amplitude_reduction(f.trace, "i_l0", f.schedule.flip_times.front(),
                                              f.schedule.flip_times.back(), T, 2);
  }
  json meta = j;
  meta["model"] = model_json(cfg.setup.model);
  write_text_file_atomic((fs::path(out_dir) / "summary.json").string(), meta.dump(2) + "\n");
  print(j);
  return 0;
}

int cmd_modulate(const std::string& bits_arg, const std::string& config_path, std::optional<std::uint64_t> seed_opt,
                 const std::string& out_dir) {
  const auto cfg = config_or_default(config_path);
  const auto seed = cfg.require_seed(seed_opt);
  const LinkSimulator sim(cfg.setup);
  const auto link = effective_link(sim, cfg);
  std::size_t n_bytes = 0;
  const auto bits = parse_bits_arg(bits_arg, n_bytes);
  const auto stream = frame_stream(bits, cfg.setup.fmt);
  fs::create_directories(out_dir);
  CsvWriter sym((fs::path(out_dir) / "symbols.csv").string(), {"index", "symbol"});
  for (std::size_t i = 0; i < stream.symbols.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, 7, i));
    write_capture((fs::path(out_dir) / frame_name(i)).string(), sim.capture(stream.symbols[i], link, rng), &link);
    sym.row({static_cast<double>(i), static_cast<double>(stream.symbols[i])});
  }
  sym.commit();
  const json meta = {{"frames", stream.symbols.size()}, {"bits", bits.size()}, {"padding_bits", stream.padding_bits},
                     {"seed", seed}, {"bit_rate_bps", cfg.setup.fmt.bit_rate(sim.carrier_frequency())}};
  write_text_file_atomic((fs::path(out_dir) / "stream.json").string(), meta.dump(2) + "\n");
  json j = meta;
  j["out"] = out_dir;
  print(j);
  return 0;
}

int cmd_demodulate(const std::string& method, const std::string& mlp_path, const std::string& input_dir,
                   const std::string& config_path) {
  const auto cfg = config_or_default(config_path);
  const LinkSimulator sim(cfg.setup);
  const auto decoder = parse_decoder(method);
  std::optional<IntegerMlp> mlp;
  if (decoder == Decoder::mlp) {
    if (mlp_path.empty()) fail(ErrorKind::config, "demodulate: --model-mlp required for method mlp");
    mlp.emplace(read_mlp(mlp_path));
  }
  json meta;
  try {
    meta = json::parse(read_text_file((fs::path(input_dir) / "stream.json").string()));
  } catch (const json::exception& e) {
    fail(ErrorKind::input, std::string("stream.json: ") + e.what());
  }
  const auto n = meta.at("frames").get<std::size_t>();
  SymbolStream rx{{}, meta.at("padding_bits").get<int>()};
  std::size_t decode_errors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cap = read_capture((fs::path(input_dir) / frame_name(i)).string());
    int got = 0;
    if (decoder == Decoder::drop) {
      bool derr = false;
      got = decode_drop(sim, cap, cfg.drop, &derr);
      decode_errors += derr;
    } else {
      got = mlp->infer(mlp_window(cap)).code;
    }
    rx.symbols.push_back(got < 0 ? 0 : got);
  }
  const auto bits = unframe_stream(rx, cfg.setup.fmt);
  json j = {{"method", method}, {"frames", n}, {"symbols", rx.symbols}, {"hex", bits_to_hex(bits)},
            {"decode_errors", decode_errors}};
  const auto sym_path = fs::path(input_dir) / "symbols.csv";
  if (fs::exists(sym_path)) {
    const auto rows = read_csv(sym_path.string(), {"index", "symbol"});
    std::size_t errs = 0, bit_errs = 0;
    for (std::size_t i = 0; i < rows.size() && i < rx.symbols.size(); ++i) {
      const int sent = static_cast<int>(rows[i][1]);
      errs += sent != rx.symbols[i];
      bit_errs += static_cast<std::size_t>(bit_errors(sent, rx.symbols[i], cfg.setup.fmt.symbol_bits));
    }
    j["symbol_errors"] = errs;
    j["bit_errors"] = bit_errs;
  }
  print(j);
  return 0;
}

int cmd_ber_sweep(const std::string& config_path, std::size_t packets, const std::string& decoders,
                  const std::string& mlp_path, std::optional<std::uint64_t> seed_opt, const std::string& out) {
  const auto cfg = config_or_default(config_path);
  BerOptions opt;
  opt.n_packets = packets;
  opt.seed = cfg.require_seed(seed_opt);
  opt.drop = cfg.drop;
  opt.decoders.clear();
  std::stringstream ss(decoders);
  for (std::string name; std::getline(ss, name, ',');) opt.decoders.push_back(parse_decoder(name));
  std::optional<QuantizedMlp> model;
  if (!mlp_path.empty()) {
    model = read_mlp(mlp_path);
    opt.mlp = &*model;
  }
  const LinkSimulator sim(cfg.setup);
  const auto conditions = sweep_conditions(sim, cfg);
  const auto rows = ber_sweep(sim, conditions, opt);
  write_ber_csv(out, rows);
  json j = {{"seed", opt.seed}, {"packets", packets}, {"out", out}, {"rows", json::array()}};
  for (const auto& r : rows) {
    j["rows"].push_back({{"condition", r.condition}, {"decoder", to_string(r.decoder)}, {"ber", r.ber},
                         {"bit_errors", r.bit_errors}, {"bits", r.bits},
                         {"snr_db", std::isfinite(r.snr_db) ? json(r.snr_db) : json(nullptr)}});
  }
  print(j);
  return 0;
}

int cmd_make_dataset(const std::string& config_path, std::optional<std::uint64_t> seed_opt, std::size_t per_class,
                     const std::string& out_dir) {
  const auto cfg = config_or_default(config_path);
  const auto seed = cfg.require_seed(seed_opt);
  const LinkSimulator sim(cfg.setup);
  const auto conditions = sweep_conditions(sim, cfg);
  std::vector<RxCapture> caps;
  const auto windows = synthesize_windows(sim, conditions, per_class ? per_class : cfg.dataset_per_class, seed, &caps);
  std::vector<int> codes;
  for (const auto& w : windows) codes.push_back(w.code);
  write_dataset(out_dir, caps, codes);
  print({{"windows", windows.size()}, {"conditions", conditions.size()}, {"seed", seed}, {"out", out_dir}});
  return 0;
}

int cmd_train(const std::string& dataset_dir, const std::string& config_path, std::optional<std::uint64_t> seed_opt,
              const std::string& out) {
  const auto cfg = config_or_default(config_path);
  auto hyper = cfg.mlp;
  hyper.seed = cfg.require_seed(seed_opt);
  const auto data = read_dataset(dataset_dir);
  const auto r = train_mlp(data, hyper);
  write_mlp(out, r.model);
  print({{"seed", hyper.seed},
         {"windows", data.size()},
         {"train_accuracy", r.report.train_accuracy},
         {"quantized_agreement", r.report.quantized_agreement},
         {"final_loss", r.report.final_loss},
         {"packed_bytes", r.model.packed_bytes()},
         {"out", out}});
  return 0;
}

int cmd_stream(const std::string& input, const std::string& config_path, const std::string& decoder,
               const std::string& mlp_path, std::optional<std::uint64_t> seed_opt, const std::string& out_dir) {
  const auto cfg = config_or_default(config_path);
  std::vector<double> t, v;
  read_lfp_csv(input, t, v);
  const LinkSimulator sim(cfg.setup);
  StreamConfig sc;
  sc.front_end = cfg.lfp;
  sc.cic = cfg.cic;
  sc.fifo_depth = cfg.fifo_depth;
  sc.link = effective_link(sim, cfg);
  sc.decoder = parse_decoder(decoder);
  sc.drop = cfg.drop;
  sc.seed = cfg.require_seed(seed_opt);
  std::optional<QuantizedMlp> model;
  if (!mlp_path.empty()) {
    model = read_mlp(mlp_path);
    sc.mlp = &*model;
  }
  const auto rep = stream_pipeline(t, v, sim, sc);
  fs::create_directories(out_dir);
  std::vector<double> volts;
  for (auto c : rep.reconstructed) volts.push_back(c * rep.volts_per_code);
  write_lfp_csv((fs::path(out_dir) / "reconstruction.csv").string(), rep.time, volts);
  const auto report = stream_report_json(rep, sc.seed);
  write_text_file_atomic((fs::path(out_dir) / "report.json").string(), report + "\n");
  std::cout << report << "\n";
  return 0;
}

int cmd_synth_lfp(double freq, double amplitude, double duration, double fs_hz, const std::string& out) {
  if (!(fs_hz > 0.0) || !(duration > 0.0)) fail(ErrorKind::input, "synth-lfp: fs and duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs_hz));
  std::vector<double> t(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i) / fs_hz;
    v[i] = amplitude * std::sin(2.0 * kPi * freq * t[i]);
  }
  write_lfp_csv(out, t, v);
  print({{"samples", n}, {"out", out}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mebctl: magnetoelectric backscatter link toolkit"};
  app.require_subcommand(1);

  std::string input, out, config, model, method = "drop", mlp_path, decoders = "drop", bits;
  int order = 3, code = 0;
  double phase_weight = 1.0, f_lo = 1e4, f_hi = 2e6, freq = 10.0, amplitude = 1e-3, duration = 1.0, lfp_fs = 16000.0;
  std::size_t points = 400, packets = 1000, per_class = 0;
  std::optional<std::uint64_t> seed;

  auto* fit = app.add_subcommand("fit", "Fit an equivalent-circuit model to an impedance sweep");
  fit->add_option("--input", input, "Impedance CSV (freq_hz,re_ohm,im_ohm)")->required();
  fit->add_option("--order", order, "Number of motional branches")->required();
  fit->add_option("--out", out, "Model JSON")->required();
  fit->add_option("--phase-weight", phase_weight, "Weight of the phase residual");

  auto* synth = app.add_subcommand("synth-impedance", "Write the impedance sweep of a model");
  synth->add_option("--order", order, "Reference model order (1 or 3)");
  synth->add_option("--model", model, "Model JSON instead of the reference model");
  synth->add_option("--f-lo", f_lo);
  synth->add_option("--f-hi", f_hi);
  synth->add_option("--points", points);
  synth->add_option("--out", out)->required();

  auto* sim = app.add_subcommand("simulate", "Simulate one frame and write waveforms");
  sim->add_option("--model", model, "Model JSON (overrides the config)");
  sim->add_option("--config", config, "Experiment config JSON");
  sim->add_option("--scee-code", code, "Symbol 0..7")->required();
  sim->add_option("--out", out, "Output directory")->required();

  auto* mod = app.add_subcommand("modulate", "Bits to received frame captures");
  mod->add_option("--bits", bits, "File or hex string")->required();
  mod->add_option("--config", config);
  mod->add_option("--seed", seed);
  mod->add_option("--out", out, "Output directory")->required();

  auto* demod = app.add_subcommand("demodulate", "Decode frame captures written by modulate");
  demod->add_option("--method", method, "drop or mlp");
  demod->add_option("--model-mlp", mlp_path, "MEQ1 model for method mlp");
  demod->add_option("--input", input, "Capture directory")->required();
  demod->add_option("--config", config);

  auto* ber = app.add_subcommand("ber-sweep", "Monte-Carlo bit error rate over link conditions");
  ber->add_option("--config", config);
  ber->add_option("--packets", packets)->required();
  ber->add_option("--decoders", decoders, "Comma list: drop,mlp");
  ber->add_option("--model-mlp", mlp_path);
  ber->add_option("--seed", seed);
  ber->add_option("--out", out, "Table CSV")->required();

  auto* mkds = app.add_subcommand("make-dataset", "Synthesize labeled captures for MLP training");
  mkds->add_option("--config", config);
  mkds->add_option("--seed", seed);
  mkds->add_option("--per-class", per_class, "Windows per code and condition");
  mkds->add_option("--out", out, "Dataset directory")->required();

  auto* train = app.add_subcommand("train-mlp", "Train and quantize the waveform classifier");
  train->add_option("--dataset", input, "Dataset directory")->required();
  train->add_option("--config", config);
  train->add_option("--seed", seed);
  train->add_option("--out", out, "MEQ1 model")->required();

  auto* stream = app.add_subcommand("stream-lfp", "Stream an LFP recording through the uplink");
  stream->add_option("--input", input, "LFP CSV (time_s,volts)")->required();
  stream->add_option("--config", config);
  stream->add_option("--decoder", method, "drop or mlp");
  stream->add_option("--model-mlp", mlp_path);
  stream->add_option("--seed", seed);
  stream->add_option("--out", out, "Output directory")->required();

  auto* lfp = app.add_subcommand("synth-lfp", "Write a sinusoidal test LFP");
  lfp->add_option("--freq-hz", freq);
  lfp->add_option("--amplitude-v", amplitude);
  lfp->add_option("--duration-s", duration);
  lfp->add_option("--fs-hz", lfp_fs);
  lfp->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }

  try {
    if (*fit) return cmd_fit(input, order, out, phase_weight);
    if (*synth) return cmd_synth_impedance(order, model, f_lo, f_hi, points, out);
    if (*sim) return cmd_simulate(model, config, code, out);
    if (*mod) return cmd_modulate(bits, config, seed, out);
    if (*demod) return cmd_demodulate(method, mlp_path, input, config);
    if (*ber) return cmd_ber_sweep(config, packets, decoders, mlp_path, seed, out);
    if (*mkds) return cmd_make_dataset(config, seed, per_class, out);
    if (*train) return cmd_train(input, config, seed, out);
    if (*stream) return cmd_stream(input, config, method, mlp_path, seed, out);
    if (*lfp) return cmd_synth_lfp(freq, amplitude, duration, lfp_fs, out);
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  return 0;
}
