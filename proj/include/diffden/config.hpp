#pragma once

// Run configuration: every knob of one end-to-end experiment in a single JSON
// file (comments allowed). Unknown keys are rejected at every level.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "diffden/backtest.hpp"
#include "diffden/classifier.hpp"
#include "diffden/data_ingest.hpp"
#include "diffden/denoiser.hpp"
#include "diffden/score_model.hpp"
#include "diffden/sde.hpp"

namespace diffden {

inline constexpr int kConfigSchemaVersion = 1;

struct InputSpec {
  std::string path;
  CsvSchema schema;
  bool operator==(const InputSpec& o) const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::vector<InputSpec> inputs;

  IngestOptions ingest;
  double ema_decay = 0.5;

  std::vector<SdeKind> sde_kinds{SdeKind::VE, SdeKind::VP};
  SdeSpec sde;  // kind is taken from sde_kinds per family
  ModelShape model;  // length follows ingest.length
  TrainConfig train;  // seed derived from `seed`
  DenoiseConfig denoise;  // base_seed derived from `seed`
  std::size_t denoise_batch = 256;

  BoostedTreesConfig classifier;
  std::size_t classifier_seeds = 5;

  std::vector<double> dc_thresholds{0.01, 0.02, 0.03};

  StrategyParams strategy;
  std::size_t backtest_points = 250;

  /// Recomputes the derived fields (model length, per-stage seeds).
  void finalize();
  void validate() const;
  std::vector<std::uint64_t> classifier_seed_list() const;

  bool operator==(const RunConfig& o) const;
};

std::string config_to_json(const RunConfig& cfg, int indent = 2);
/// Parses, fills defaults for missing keys, rejects unknown keys (BadConfig),
/// then finalizes.
RunConfig config_from_json(std::string_view text);
RunConfig load_config(const std::string& path);

}  // namespace diffden
