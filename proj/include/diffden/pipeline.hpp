#pragma once

// End-to-end experiment: ingest -> train -> denoise -> classify -> dc-events
// -> backtests, for the families Ori, EMA and one denoised family per SDE.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "diffden/backtest.hpp"
#include "diffden/config.hpp"
#include "diffden/data_ingest.hpp"
#include "diffden/score_model.hpp"
#include "diffden/window_io.hpp"

namespace diffden {

inline constexpr int kReportSchemaVersion = 1;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// "VE-SDE" / "VP-SDE"
std::string family_name(SdeKind kind);

/// Denoises every window of `windows` (any role) in batches. Row i of the
/// flattened train-then-test order uses stream id stream_offset + i. The
/// output keeps each window's norm params so denormalize gives prices.
WindowFile denoise_windows(const ScoreModel& model, const WindowFile& windows, const DenoiseConfig& cfg,
                           std::size_t batch, std::uint64_t stream_offset = 0);

/// Causal denoised series: value t is the last point of the denoised window
/// that ends at `ends[k]` (window [t - L + 1, t] of `series`, normalized on its own).
std::vector<double> causal_denoised(const ScoreModel& model, std::span<const double> series,
                                    std::span<const std::size_t> ends, const DenoiseConfig& cfg,
                                    std::size_t batch, std::uint64_t stream_offset);

struct StageTiming {
  std::string stage;
  double wall_seconds = 0.0;
};

struct RunReport {
  std::string metrics_json;  // deterministic
  std::string report_json;   // config echo, timings, digests, metrics
  std::vector<StageTiming> timings;
  std::map<std::string, std::string> digests;  // artifact file name -> sha256
};

/// Runs every stage and writes artifacts plus metrics.json and
/// run_report.json into cfg.output_dir. Errors are rethrown with the stage
/// name prefixed.
RunReport pipeline_run(const RunConfig& cfg);

}  // namespace diffden
