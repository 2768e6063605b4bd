#pragma once

// Conditional score network s(x, t, c) and its weighted denoising score
// matching trainer.
//
// The network is a pre-activation residual MLP over [x, c, embed(t)]:
//
//   h0      = W_in [x, c, e(t)] + b_in
//   h_{k+1} = h_k + W2_k silu(W1_k silu(h_k) + b1_k) + b2_k     (depth blocks)
//   raw     = W_out silu(h_D) + b_out
//   s       = raw / std(t)
//
// With c = none the input slot holds a learned null token. Training regresses
// raw onto -z for x_t = m(t) x0 + std(t) z, which is the DSM objective
// weighted by lambda(t) = std(t)^2.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffden/data_ingest.hpp"
#include "diffden/sde.hpp"

namespace diffden {

/// Sinusoidal embedding: [sin(w_k t)..., cos(w_k t)...] with dim/2 frequencies
/// spaced geometrically from 1 to 1e4.
std::vector<double> embed_time(double t, std::size_t dim = 32);
void embed_time_into(double t, std::span<double> out);

struct ModelShape {
  std::size_t length = 60;
  std::size_t embed_dim = 32;
  std::size_t hidden = 128;
  std::size_t depth = 3;

  std::size_t input_width() const noexcept { return 2 * length + embed_dim; }
  std::size_t parameter_count() const noexcept;
  void validate() const;
  bool operator==(const ModelShape&) const = default;
};

/// A batch of network evaluations. Row r of `x`, `cond` is length L; when
/// use_cond[r] == 0 the null token replaces cond row r (cond may then be empty).
struct ForwardBatch {
  std::span<const double> x;
  std::span<const double> t;
  std::span<const double> cond;
  std::span<const std::uint8_t> use_cond;
};

class ScoreModel {
 public:
  ScoreModel(const ModelShape& shape, const SdeSpec& sde, std::uint64_t init_seed);

  const ModelShape& shape() const noexcept { return shape_; }
  const SdeSpec& sde() const noexcept { return sde_; }
  std::size_t length() const noexcept { return shape_.length; }

  /// When set, the null token is substituted for every condition.
  bool unconditional_only() const noexcept { return unconditional_only_; }
  void set_unconditional_only(bool v) noexcept { unconditional_only_ = v; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  /// Score estimate for one input; `cond` empty means c = none.
  std::vector<double> forward(std::span<const double> x, double t,
                              std::optional<std::span<const double>> cond) const;

  /// Score estimates for a batch, written row-major into `out` (rows x L).
  void forward_batch(const ForwardBatch& batch, std::span<double> out) const;

  /// Network output before the 1/std(t) rescaling.
  void raw_batch(const ForwardBatch& batch, std::span<double> out) const;

 private:
  friend class ScoreModelAccess;
  ModelShape shape_;
  SdeSpec sde_;
  bool unconditional_only_ = false;
  std::vector<double> params_;
};

/// omega * s(x, t, c) + (1 - omega) * s(x, t, none). omega == 1 and omega == 0
/// evaluate only the conditional or unconditional branch.
std::vector<double> cf_guided_score(const ScoreModel& model, std::span<const double> x, double t,
                                    std::span<const double> cond, double omega);

/// Batched guidance: rows of x and cond share one time value.
void cf_guided_score_batch(const ScoreModel& model, std::span<const double> x, double t,
                           std::span<const double> cond, double omega, std::span<double> out);

/// Fixed draws for one DSM objective evaluation; rows x L for x0 and z.
struct DsmBatch {
  std::size_t rows = 0;
  std::vector<double> x0;
  std::vector<double> z;
  std::vector<double> t;
  std::vector<std::uint8_t> use_cond;
};

/// Mean over rows of ||std(t) s(x_t, t, c) + z||^2 with c = x0 (or none).
/// When `grad` is non-empty it receives d(loss)/d(parameters).
double dsm_loss(const ScoreModel& model, const DsmBatch& batch, std::span<double> grad = {});

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double p_uncond = 0.2;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainResult {
  ScoreModel model;
  std::vector<double> loss_curve;  // per-epoch mean per-sample loss
};

/// Trains on the given normalized windows (each of length shape.length).
TrainResult train_dsm(std::span<const std::vector<double>> samples, const SdeSpec& sde,
                      const ModelShape& shape, const TrainConfig& cfg);

/// Trains on the non-degenerate sample windows of a WindowSet.
TrainResult train_dsm(const WindowSet& dataset, const SdeSpec& sde, const ModelShape& shape,
                      const TrainConfig& cfg);

/// Little-endian model file; see docs/formats.md.
void save_model(const ScoreModel& model, const std::string& path);
std::string serialize_model(const ScoreModel& model);
ScoreModel load_model(const std::string& path, std::optional<std::size_t> expected_length = {});
ScoreModel deserialize_model(std::string_view bytes,
                             std::optional<std::size_t> expected_length = {});

}  // namespace diffden
