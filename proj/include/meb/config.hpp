#pragma once

// Experiment configuration JSON. Unknown keys are rejected; every section and
// field is optional and falls back to the library defaults. Schema reference:
// docs/config.md.

#include <optional>
#include <string>
#include <vector>

#include "meb/ber.hpp"
#include "meb/link.hpp"
#include "meb/mlp.hpp"
#include "meb/recording.hpp"

namespace meb {

struct SweepConfig {
  std::vector<double> distances = {0.01, 0.02, 0.03, 0.04, 0.05};
  std::optional<double> snr_db;   // noise set from the weakest code at snr_ref_distance
  double snr_ref_distance = 0.05;
  std::vector<double> noise_grid; // when non-empty: one condition per noise level at link.distance
  bool auto_gain = true;
};

struct ExperimentConfig {
  std::optional<std::string> model_path;
  int model_order = 3;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  LinkSetup setup;
  LinkConfig link;
  bool link_auto_gain = true;
  DropDetectConfig drop;
  SweepConfig sweep;
  MlpHyper mlp;
  std::size_t dataset_per_class = 200;
  LfpFrontEnd lfp;
  CicConfig cic;
  std::size_t fifo_depth = 64;

  // Seed required by stochastic commands (`override` from the command line
  // takes precedence).
  std::uint64_t require_seed(std::optional<std::uint64_t> override_seed) const;
};

// `base_dir` resolves a relative model path.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// Link condition(s) implied by the config: the single `link` section (with
// auto gain when enabled) for non-sweep commands.
LinkConfig effective_link(const LinkSimulator& sim, const ExperimentConfig& cfg);
std::vector<BerCondition> sweep_conditions(const LinkSimulator& sim, const ExperimentConfig& cfg);

}  // namespace meb
