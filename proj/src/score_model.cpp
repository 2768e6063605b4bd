#include "diffden/score_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "diffden/error.hpp"
#include "diffden/kernels.hpp"
#include "diffden/rng.hpp"

namespace diffden {
namespace {

struct BlockOffsets {
  std::size_t w1, b1, w2, b2;
};

// Offsets of each tensor inside the flat parameter vector.
struct Layout {
  std::size_t w_in, b_in;
  std::vector<BlockOffsets> blocks;
  std::size_t w_out, b_out, null_token, total;

  explicit Layout(const ModelShape& s) {
    const std::size_t h = s.hidden, in = s.input_width(), l = s.length;
    std::size_t off = 0;
    w_in = off, off += h * in;
    b_in = off, off += h;
    for (std::size_t k = 0; k < s.depth; ++k) {
      BlockOffsets b{};
      b.w1 = off, off += h * h;
      b.b1 = off, off += h;
      b.w2 = off, off += h * h;
      b.b2 = off, off += h;
      blocks.push_back(b);
    }
    w_out = off, off += l * h;
    b_out = off, off += l;
    null_token = off, off += l;
    total = off;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// Activations kept for the backward pass.
struct Tape {
  std::size_t rows = 0;
  std::vector<double> in;   // rows x I
  std::vector<double> h;    // (D + 1) x rows x H
  std::vector<double> u;    // D x rows x H, silu(h_k)
  std::vector<double> v;    // D x rows x H
  std::vector<double> w;    // D x rows x H, silu(v_k)
  std::vector<double> top;  // rows x H, silu(h_D)
  std::vector<double> tmp;  // rows x H
  std::vector<double> raw;  // rows x L
  std::vector<std::uint8_t> use_cond;
};

void run_forward(const ModelShape& s, std::span<const double> p, bool unconditional_only,
                 const ForwardBatch& batch, Tape& tape) {
  const Layout lay(s);
  const auto& k = kernels::active();
  const std::size_t rows = batch.t.size();
  const std::size_t L = s.length, H = s.hidden, I = s.input_width(), D = s.depth;
  if (batch.x.size() != rows * L)
    throw Error(Errc::LengthMismatch, "forward batch x has the wrong size");
  if (!batch.use_cond.empty() && batch.use_cond.size() != rows)
    throw Error(Errc::LengthMismatch, "forward batch mask has the wrong size");

  tape.rows = rows;
  tape.in.resize(rows * I);
  tape.h.resize((D + 1) * rows * H);
  tape.u.resize(D * rows * H);
  tape.v.resize(D * rows * H);
  tape.w.resize(D * rows * H);
  tape.top.resize(rows * H);
  tape.tmp.resize(rows * H);
  tape.raw.resize(rows * L);
  tape.use_cond.assign(rows, 0);

  const double* null_token = p.data() + lay.null_token;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = tape.in.data() + r * I;
    std::copy_n(batch.x.data() + r * L, L, row);
    const bool use = !unconditional_only && !batch.use_cond.empty() && batch.use_cond[r] != 0;
    if (use) {
      if (batch.cond.size() < (r + 1) * L)
        throw Error(Errc::LengthMismatch, "forward batch cond has the wrong size");
      std::copy_n(batch.cond.data() + r * L, L, row + L);
    } else {
      std::copy_n(null_token, L, row + L);
    }
    tape.use_cond[r] = use ? 1 : 0;
    embed_time_into(batch.t[r], std::span<double>(row + 2 * L, s.embed_dim));
  }

  double* h0 = tape.h.data();
  k.gemm_nt(tape.in.data(), p.data() + lay.w_in, p.data() + lay.b_in, h0, rows, H, I);
  for (std::size_t b = 0; b < D; ++b) {
    const BlockOffsets& o = lay.blocks[b];
    const double* hk = tape.h.data() + b * rows * H;
    double* hn = tape.h.data() + (b + 1) * rows * H;
    double* uk = tape.u.data() + b * rows * H;
    double* vk = tape.v.data() + b * rows * H;
    double* wk = tape.w.data() + b * rows * H;
    for (std::size_t i = 0; i < rows * H; ++i) uk[i] = silu(hk[i]);
    k.gemm_nt(uk, p.data() + o.w1, p.data() + o.b1, vk, rows, H, H);
    for (std::size_t i = 0; i < rows * H; ++i) wk[i] = silu(vk[i]);
    k.gemm_nt(wk, p.data() + o.w2, p.data() + o.b2, tape.tmp.data(), rows, H, H);
    for (std::size_t i = 0; i < rows * H; ++i) hn[i] = hk[i] + tape.tmp[i];
  }
  const double* hd = tape.h.data() + D * rows * H;
  for (std::size_t i = 0; i < rows * H; ++i) tape.top[i] = silu(hd[i]);
  k.gemm_nt(tape.top.data(), p.data() + lay.w_out, p.data() + lay.b_out, tape.raw.data(), rows,
            L, H);
}

void add_column_sums(const double* g, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += g[r * cols + c];
}

// Accumulates d(loss)/d(params) into grad given d(loss)/d(raw).
void run_backward(const ModelShape& s, std::span<const double> p, const Tape& tape,
                  std::span<const double> d_raw, std::span<double> grad) {
  const Layout lay(s);
  const auto& k = kernels::active();
  const std::size_t rows = tape.rows;
  const std::size_t L = s.length, H = s.hidden, I = s.input_width(), D = s.depth;

  k.gemm_tn_acc(d_raw.data(), tape.top.data(), grad.data() + lay.w_out, rows, L, H);
  add_column_sums(d_raw.data(), rows, L, grad.data() + lay.b_out);

  std::vector<double> dh(rows * H), dtmp(rows * H), dv(rows * H);
  k.gemm_nn(d_raw.data(), p.data() + lay.w_out, dtmp.data(), rows, L, H);
  const double* hd = tape.h.data() + D * rows * H;
  for (std::size_t i = 0; i < rows * H; ++i) dh[i] = dtmp[i] * silu_grad(hd[i]);

  for (std::size_t b = D; b-- > 0;) {
    const BlockOffsets& o = lay.blocks[b];
    const double* hk = tape.h.data() + b * rows * H;
    const double* uk = tape.u.data() + b * rows * H;
    const double* vk = tape.v.data() + b * rows * H;
    const double* wk = tape.w.data() + b * rows * H;
    k.gemm_tn_acc(dh.data(), wk, grad.data() + o.w2, rows, H, H);
    add_column_sums(dh.data(), rows, H, grad.data() + o.b2);
    k.gemm_nn(dh.data(), p.data() + o.w2, dtmp.data(), rows, H, H);
    for (std::size_t i = 0; i < rows * H; ++i) dv[i] = dtmp[i] * silu_grad(vk[i]);
    k.gemm_tn_acc(dv.data(), uk, grad.data() + o.w1, rows, H, H);
    add_column_sums(dv.data(), rows, H, grad.data() + o.b1);
    k.gemm_nn(dv.data(), p.data() + o.w1, dtmp.data(), rows, H, H);
    for (std::size_t i = 0; i < rows * H; ++i) dh[i] += dtmp[i] * silu_grad(hk[i]);
  }

  k.gemm_tn_acc(dh.data(), tape.in.data(), grad.data() + lay.w_in, rows, H, I);
  add_column_sums(dh.data(), rows, H, grad.data() + lay.b_in);

  const bool any_null = std::any_of(tape.use_cond.begin(), tape.use_cond.end(),
                                    [](std::uint8_t u) { return u == 0; });
  if (any_null) {
    std::vector<double> din(rows * I);
    k.gemm_nn(dh.data(), p.data() + lay.w_in, din.data(), rows, H, I);
    double* dnull = grad.data() + lay.null_token;
    for (std::size_t r = 0; r < rows; ++r) {
      if (tape.use_cond[r]) continue;
      for (std::size_t j = 0; j < L; ++j) dnull[j] += din[r * I + L + j];
    }
  }
}

double kernel_std(const SdeSpec& sde, double t) {
  return kernel_params(sde, std::max(t, kTimeEpsilon)).std;
}

// Little-endian byte helpers for the model file.
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u(std::size_t width) {
    if (pos_ + width > bytes_.size()) throw Error(Errc::IoError, "model file is truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
  std::uint64_t u64() { return u(8); }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(u(1)); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'D', 'F', 'S', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

void embed_time_into(double t, std::span<double> out) {
  const std::size_t half = out.size() / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double exponent = half > 1 ? 4.0 * static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
    const double freq = std::pow(10.0, exponent);
    out[k] = std::sin(freq * t);
    out[half + k] = std::cos(freq * t);
  }
  if (out.size() % 2 == 1) out.back() = 0.0;
}

std::vector<double> embed_time(double t, std::size_t dim) {
  std::vector<double> out(dim);
  embed_time_into(t, out);
  return out;
}

std::size_t ModelShape::parameter_count() const noexcept { return Layout(*this).total; }

void ModelShape::validate() const {
  if (length < 2 || hidden < 1 || embed_dim < 2 || embed_dim % 2 != 0)
    throw Error(Errc::BadParams, "model shape needs length >= 2, hidden >= 1, even embed_dim");
}

ScoreModel::ScoreModel(const ModelShape& shape, const SdeSpec& sde, std::uint64_t init_seed)
    : shape_(shape), sde_(sde) {
  shape_.validate();
  sde_.validate();
  const Layout lay(shape_);
  params_.assign(lay.total, 0.0);
  Rng rng(init_seed, 0x5eed);
  auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in, double gain) {
    const double a = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = rng.uniform(-a, a);
  };
  const std::size_t H = shape_.hidden;
  fill(lay.w_in, H * shape_.input_width(), shape_.input_width(), 1.0);
  for (const BlockOffsets& b : lay.blocks) {
    fill(b.w1, H * H, H, 1.0);
    fill(b.w2, H * H, H, 0.5);
  }
  fill(lay.w_out, shape_.length * H, H, 0.1);
}

void ScoreModel::raw_batch(const ForwardBatch& batch, std::span<double> out) const {
  thread_local Tape tape;
  run_forward(shape_, params_, unconditional_only_, batch, tape);
  if (out.size() != tape.raw.size()) throw Error(Errc::LengthMismatch, "output span size");
  std::copy(tape.raw.begin(), tape.raw.end(), out.begin());
}

void ScoreModel::forward_batch(const ForwardBatch& batch, std::span<double> out) const {
  raw_batch(batch, out);
  const std::size_t L = shape_.length;
  for (std::size_t r = 0; r < batch.t.size(); ++r) {
    const double inv = 1.0 / kernel_std(sde_, batch.t[r]);
    for (std::size_t j = 0; j < L; ++j) out[r * L + j] *= inv;
  }
}

std::vector<double> ScoreModel::forward(std::span<const double> x, double t,
                                        std::optional<std::span<const double>> cond) const {
  if (x.size() != shape_.length) throw Error(Errc::ShapeMismatch, "input length differs from L");
  if (cond && cond->size() != shape_.length)
    throw Error(Errc::ShapeMismatch, "condition length differs from L");
  const double times[1] = {t};
  const std::uint8_t mask[1] = {static_cast<std::uint8_t>(cond ? 1 : 0)};
  std::vector<double> out(shape_.length);
  forward_batch({x, times, cond ? *cond : std::span<const double>{}, mask}, out);
  return out;
}

void cf_guided_score_batch(const ScoreModel& model, std::span<const double> x, double t,
                           std::span<const double> cond, double omega, std::span<double> out) {
  const std::size_t L = model.length();
  const std::size_t rows = x.size() / L;
  std::vector<double> times(rows, t);
  std::vector<std::uint8_t> on(rows, 1), off(rows, 0);
  if (omega == 1.0) {
    model.forward_batch({x, times, cond, on}, out);
    return;
  }
  if (omega == 0.0) {
    model.forward_batch({x, times, {}, off}, out);
    return;
  }
  std::vector<double> uncond(out.size());
  model.forward_batch({x, times, cond, on}, out);
  model.forward_batch({x, times, {}, off}, uncond);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = omega * out[i] + (1.0 - omega) * uncond[i];
}

std::vector<double> cf_guided_score(const ScoreModel& model, std::span<const double> x, double t,
                                    std::span<const double> cond, double omega) {
  if (x.size() != model.length() || cond.size() != model.length())
    throw Error(Errc::ShapeMismatch, "guided score inputs must have length L");
  std::vector<double> out(model.length());
  cf_guided_score_batch(model, x, t, cond, omega, out);
  return out;
}

double dsm_loss(const ScoreModel& model, const DsmBatch& batch, std::span<double> grad) {
  const std::size_t L = model.length();
  const std::size_t rows = batch.rows;
  if (batch.x0.size() != rows * L || batch.z.size() != rows * L || batch.t.size() != rows ||
      batch.use_cond.size() != rows)
    throw Error(Errc::LengthMismatch, "DSM batch arrays disagree with rows");

  std::vector<double> xt(rows * L);
  for (std::size_t r = 0; r < rows; ++r) {
    const KernelParams kp = kernel_params(model.sde(), std::max(batch.t[r], kTimeEpsilon));
    for (std::size_t j = 0; j < L; ++j)
      xt[r * L + j] = kp.mean_coeff * batch.x0[r * L + j] + kp.std * batch.z[r * L + j];
  }

  thread_local Tape tape;
  run_forward(model.shape(), model.parameters(), model.unconditional_only(),
              {xt, batch.t, batch.x0, batch.use_cond}, tape);

  // std(t) * s = raw, so the weighted residual is raw + z.
  std::vector<double> d_raw(rows * L);
  double loss = 0.0;
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows * L; ++i) {
    const double e = tape.raw[i] + batch.z[i];
    loss += e * e;
    d_raw[i] = 2.0 * e * inv_rows;
  }
  loss *= inv_rows;
  if (!grad.empty()) {
    if (grad.size() != model.parameters().size())
      throw Error(Errc::LengthMismatch, "gradient span size");
    std::fill(grad.begin(), grad.end(), 0.0);
    run_backward(model.shape(), model.parameters(), tape, d_raw, grad);
  }
  return loss;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw Error(Errc::BadParams, "epochs and batch_size >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::BadParams, "learning_rate must be > 0");
  if (!(p_uncond >= 0.0 && p_uncond <= 1.0))
    throw Error(Errc::BadParams, "p_uncond must lie in [0, 1]");
  if (!(grad_clip > 0.0)) throw Error(Errc::BadParams, "grad_clip must be > 0");
}

TrainResult train_dsm(std::span<const std::vector<double>> samples, const SdeSpec& sde,
                      const ModelShape& shape, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw Error(Errc::EmptyDataset, "no training windows");
  for (const auto& s : samples)
    if (s.size() != shape.length) throw Error(Errc::ShapeMismatch, "window length differs from L");

  TrainResult result{ScoreModel(shape, sde, cfg.seed), {}};
  ScoreModel& model = result.model;
  model.set_unconditional_only(cfg.p_uncond >= 1.0);

  const std::size_t L = shape.length;
  const std::size_t n_params = model.parameters().size();
  std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  std::uint64_t step = 0;

  Rng rng(cfg.seed, 0x7a11);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t rows = std::min(cfg.batch_size, order.size() - start);
      DsmBatch batch;
      batch.rows = rows;
      batch.x0.resize(rows * L);
      batch.z.resize(rows * L);
      batch.t.resize(rows);
      batch.use_cond.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& x0 = samples[order[start + r]];
        std::copy(x0.begin(), x0.end(), batch.x0.begin() + static_cast<std::ptrdiff_t>(r * L));
        batch.t[r] = rng.uniform(kTimeEpsilon, sde.horizon);
        rng.fill_gaussian(std::span<double>(batch.z).subspan(r * L, L));
        batch.use_cond[r] = rng.uniform() < cfg.p_uncond ? 0 : 1;
      }
      const double loss = dsm_loss(model, batch, grad);
      if (!std::isfinite(loss))
        throw Error(Errc::DivergedLoss, "non-finite loss in epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(rows);

      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) throw Error(Errc::DivergedLoss, "non-finite gradient");
      const double clip = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;

      ++step;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto params = model.parameters();
      for (std::size_t i = 0; i < n_params; ++i) {
        const double g = grad[i] * clip;
        m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * g;
        m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * g * g;
        params[i] -= cfg.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + kAdamEps);
      }
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

TrainResult train_dsm(const WindowSet& dataset, const SdeSpec& sde, const ModelShape& shape,
                      const TrainConfig& cfg) {
  std::vector<std::vector<double>> samples;
  for (const Window& w : dataset.windows)
    if (w.role == WindowRole::Sample && !w.norm.degenerate) samples.push_back(w.values);
  return train_dsm(samples, sde, shape, cfg);
}

std::string serialize_model(const ScoreModel& model) {
  const ModelShape& s = model.shape();
  const SdeSpec& sde = model.sde();
  std::string out(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, sde.kind == SdeKind::VE ? 0u : 1u);
  put_u64(out, sde.n_steps);
  put_f64(out, sde.sigma_min);
  put_f64(out, sde.sigma_max);
  put_f64(out, sde.beta_min);
  put_f64(out, sde.beta_max);
  put_u64(out, s.length);
  put_u64(out, s.embed_dim);
  put_u64(out, s.hidden);
  put_u64(out, s.depth);
  out.push_back(static_cast<char>(model.unconditional_only() ? 1 : 0));
  put_u64(out, model.parameters().size());
  for (double p : model.parameters()) put_f64(out, p);
  return out;
}

void save_model(const ScoreModel& model, const std::string& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "short write to " + path);
}

ScoreModel deserialize_model(std::string_view bytes, std::optional<std::size_t> expected_length) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(Errc::IoError, "not a model file (bad magic)");
  Reader rd(bytes.substr(4));
  const std::uint32_t version = rd.u32();
  if (version != kFormatVersion)
    throw Error(Errc::VersionMismatch, "model format version " + std::to_string(version));
  SdeSpec sde;
  const std::uint32_t kind = rd.u32();
  if (kind > 1) throw Error(Errc::IoError, "unknown sde kind in model file");
  sde.kind = kind == 0 ? SdeKind::VE : SdeKind::VP;
  sde.n_steps = rd.u64();
  sde.sigma_min = rd.f64();
  sde.sigma_max = rd.f64();
  sde.beta_min = rd.f64();
  sde.beta_max = rd.f64();
  ModelShape shape;
  shape.length = rd.u64();
  shape.embed_dim = rd.u64();
  shape.hidden = rd.u64();
  shape.depth = rd.u64();
  const bool unconditional_only = rd.u8() != 0;
  const std::uint64_t count = rd.u64();
  if (rd.remaining() < count * 8) throw Error(Errc::IoError, "model file is truncated");
  if (rd.remaining() > count * 8) throw Error(Errc::IoError, "trailing bytes in model file");
  if (shape.length > (1u << 20) || shape.hidden > (1u << 16) || shape.depth > 1024 ||
      shape.embed_dim > (1u << 16) || count != shape.parameter_count())
    throw Error(Errc::ShapeMismatch, "parameter count does not match the header shape");
  if (expected_length && *expected_length != shape.length)
    throw Error(Errc::ShapeMismatch, "model L = " + std::to_string(shape.length) +
                                         ", expected " + std::to_string(*expected_length));

  ScoreModel model(shape, sde, 0);
  model.set_unconditional_only(unconditional_only);
  for (double& p : model.parameters()) p = rd.f64();
  return model;
}

ScoreModel load_model(const std::string& path, std::optional<std::size_t> expected_length) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str(), expected_length);
}

}  // namespace diffden
