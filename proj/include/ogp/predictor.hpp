#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ogp/manifest.hpp"
#include "ogp/nn/adam.hpp"
#include "ogp/nn/lstm.hpp"
#include "ogp/repr_train.hpp"

namespace ogp {

struct LatentDims {
  int S = 32, C = 32, h = 4, w = 4;

  int content_size() const { return C * h * w; }
  int flat_size() const { return S + content_size(); }
  bool operator==(const LatentDims& o) const {
    return S == o.S && C == o.C && h == o.h && w == o.w;
  }

  json to_json() const { return json{{"S", S}, {"C", C}, {"h", h}, {"w", w}}; }
  static LatentDims from_json(const json& j) {
    LatentDims d;
    d.S = j.at("S").get<int>();
    d.C = j.at("C").get<int>();
    d.h = j.at("h").get<int>();
    d.w = j.at("w").get<int>();
    if (d.S < 1 || d.C < 1 || d.h < 1 || d.w < 1) throw ConfigError("bad latent dims");
    return d;
  }
  static LatentDims from_model(const ModelConfig& m) {
    return LatentDims{m.style_dim, m.content_channels, m.content_hw, m.content_hw};
  }
};

struct LatentFrame {
  std::vector<float> style;    // S
  std::vector<float> content;  // C*h*w
};

struct LatentSequence {
  LatentDims dims;
  std::vector<LatentFrame> frames;
  int H = 0, P = 0;
};

// --- LATS binary container ----------------------------------------------
//
//   magic "LATS", version u16 = 1, u32 S, C, h, w, T, H, P,
//   T frames of (S style f32 + C*h*w content f32), crc32 trailer.

inline constexpr char kLatsMagic[4] = {'L', 'A', 'T', 'S'};
inline constexpr std::uint16_t kLatsVersion = 1;

inline void write_latents(const LatentSequence& seq, const std::filesystem::path& path) {
  BinWriter w;
  w.bytes(kLatsMagic, 4);
  w.u16(kLatsVersion);
  w.u32(static_cast<std::uint32_t>(seq.dims.S));
  w.u32(static_cast<std::uint32_t>(seq.dims.C));
  w.u32(static_cast<std::uint32_t>(seq.dims.h));
  w.u32(static_cast<std::uint32_t>(seq.dims.w));
  w.u32(static_cast<std::uint32_t>(seq.frames.size()));
  w.u32(static_cast<std::uint32_t>(seq.H));
  w.u32(static_cast<std::uint32_t>(seq.P));
  for (const auto& f : seq.frames) {
    if (static_cast<int>(f.style.size()) != seq.dims.S ||
        static_cast<int>(f.content.size()) != seq.dims.content_size())
      throw ShapeError("latent frame does not match dims");
    for (float v : f.style) w.f32(v);
    for (float v : f.content) w.f32(v);
  }
  w.u32(w.crc32_all());
  w.write_file(path);
}

inline LatentSequence read_latents(const std::filesystem::path& path) {
  BinReader r = BinReader::from_file(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kLatsMagic, 4) != 0) throw BadMagicError("not a LATS file: " + path.string());
  const std::uint16_t version = r.u16();
  if (version != kLatsVersion)
    throw BadVersionError("unsupported LATS version " + std::to_string(version));
  LatentSequence seq;
  seq.dims.S = static_cast<int>(r.u32());
  seq.dims.C = static_cast<int>(r.u32());
  seq.dims.h = static_cast<int>(r.u32());
  seq.dims.w = static_cast<int>(r.u32());
  const std::uint32_t T = r.u32();
  seq.H = static_cast<int>(r.u32());
  seq.P = static_cast<int>(r.u32());
  if (seq.dims.S < 1 || seq.dims.C < 1 || seq.dims.h < 1 || seq.dims.w < 1)
    throw FormatError("bad LATS dims");
  seq.frames.resize(T);
  for (auto& f : seq.frames) {
    f.style.resize(static_cast<std::size_t>(seq.dims.S));
    for (auto& v : f.style) v = r.f32();
    f.content.resize(static_cast<std::size_t>(seq.dims.content_size()));
    for (auto& v : f.content) v = r.f32();
  }
  const std::uint32_t expect = r.crc32_prefix();
  if (r.u32() != expect) throw ChecksumError("LATS checksum mismatch: " + path.string());
  if (r.remaining() != 0) throw FormatError("trailing bytes after LATS trailer");
  return seq;
}

// --- latent dataset ------------------------------------------------------

// Encode every dataset frame with the frozen encoder, storing posterior
// means as the latent (deterministic; no sampling).
inline Manifest encode_dataset(const Manifest& dataset, const std::filesystem::path& encoder_ckpt,
                               const std::filesystem::path& out_dir) {
  using T = float;
  ReprModels<T> models = load_repr_models<T>(encoder_ckpt);
  if (!(models.config.grid == dataset.grid))
    throw ConfigError("encoder grid does not match dataset grid");
  std::filesystem::create_directories(out_dir);
  const LatentDims dims = LatentDims::from_model(models.config);

  Manifest out;
  out.kind = "latents";
  out.grid = dataset.grid;
  out.H = dataset.H;
  out.P = dataset.P;
  out.dt = dataset.dt;
  out.seed = dataset.seed;
  out.config_hash = dataset.config_hash;
  out.dir = out_dir;
  out.extra = json{{"latent_dims", dims.to_json()},
                   {"encoder_config_hash", models.config_hash},
                   {"encoder_params_hash", models.encoder_params_hash},
                   {"source_dataset_hash", dataset.config_hash}};

  for (const auto& e : dataset.sequences) {
    const ScenarioSequence seq = read_sequence(dataset.sequence_path(e));
    const int T_frames = static_cast<int>(seq.frames.size());
    Tensor<T> x({T_frames, 1, dataset.grid.height, dataset.grid.width});
    const std::int64_t cells = dataset.grid.cells();
    for (int t = 0; t < T_frames; ++t)
      for (std::int64_t i = 0; i < cells; ++i)
        x[t * cells + i] = static_cast<T>(seq.frames[static_cast<std::size_t>(t)].values[static_cast<std::size_t>(i)]);
    const PosteriorBatch<T> post = models.encoder->forward(x);

    LatentSequence lat;
    lat.dims = dims;
    lat.H = seq.H;
    lat.P = seq.P;
    lat.frames.resize(static_cast<std::size_t>(T_frames));
    for (int t = 0; t < T_frames; ++t) {
      auto& f = lat.frames[static_cast<std::size_t>(t)];
      f.style.resize(static_cast<std::size_t>(dims.S));
      for (int i = 0; i < dims.S; ++i) f.style[static_cast<std::size_t>(i)] = static_cast<float>(post.mu_style[t * dims.S + i]);
      f.content.resize(static_cast<std::size_t>(dims.content_size()));
      for (int i = 0; i < dims.content_size(); ++i)
        f.content[static_cast<std::size_t>(i)] = static_cast<float>(post.mu_content[static_cast<std::int64_t>(t) * dims.content_size() + i]);
    }
    const std::string file = e.id + ".lats";
    write_latents(lat, out_dir / file);
    SequenceEntry oe = e;
    oe.file = file;
    out.sequences.push_back(std::move(oe));
  }
  save_manifest(out, out_dir / kManifestFilename);
  return out;
}

// --- prediction network ---------------------------------------------------

struct PredictorConfig {
  int hidden = 256;
  int style_feat = 64;
  int content_feat = 128;
  int content_conv_channels = 16;
  int H = 5, P = 15;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  int batch_size = 64;
  int max_steps = 3000;
  int val_every = 100;
  int patience = 5;
  double teacher_forcing = 0.5;
  std::uint64_t seed = 2;

  void validate() const {
    if (hidden < 2 || hidden % 2 != 0) throw ConfigError("hidden size must be even and >= 2");
    if (style_feat < 1 || content_feat < 1 || content_conv_channels < 1)
      throw ConfigError("bad head sizes");
    if (H < 1 || P < 1) throw ConfigError("H and P must be >= 1");
    if (batch_size < 1 || max_steps < 1 || val_every < 1 || patience < 1)
      throw ConfigError("bad training schedule");
    if (teacher_forcing < 0 || teacher_forcing > 1) throw ConfigError("teacher_forcing must be in [0,1]");
  }

  json to_json() const {
    return json{{"hidden", hidden},
                {"style_feat", style_feat},
                {"content_feat", content_feat},
                {"content_conv_channels", content_conv_channels},
                {"H", H},
                {"P", P},
                {"lr", lr},
                {"adam_beta1", adam_beta1},
                {"adam_beta2", adam_beta2},
                {"adam_eps", adam_eps},
                {"batch_size", batch_size},
                {"max_steps", max_steps},
                {"val_every", val_every},
                {"patience", patience},
                {"teacher_forcing", teacher_forcing},
                {"seed", seed}};
  }

  static PredictorConfig from_json(const json& j) {
    PredictorConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.style_feat = j.value("style_feat", c.style_feat);
    c.content_feat = j.value("content_feat", c.content_feat);
    c.content_conv_channels = j.value("content_conv_channels", c.content_conv_channels);
    c.H = j.value("H", c.H);
    c.P = j.value("P", c.P);
    c.lr = j.value("lr", c.lr);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.val_every = j.value("val_every", c.val_every);
    c.patience = j.value("patience", c.patience);
    c.teacher_forcing = j.value("teacher_forcing", c.teacher_forcing);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  }

  std::string hash() const { return hash_hex(fnv1a64(to_json().dump())); }
};

namespace detail {

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor<T> y({n, ca + cb});
  for (int s = 0; s < n; ++s) {
    std::copy(a.data() + s * ca, a.data() + (s + 1) * ca, y.data() + s * (ca + cb));
    std::copy(b.data() + s * cb, b.data() + (s + 1) * cb, y.data() + s * (ca + cb) + ca);
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_cols(const Tensor<T>& y, int ca) {
  const int n = y.dim(0), c = y.dim(1);
  const int cb = c - ca;
  Tensor<T> a({n, ca}), b({n, cb});
  for (int s = 0; s < n; ++s) {
    std::copy(y.data() + s * c, y.data() + s * c + ca, a.data() + s * ca);
    std::copy(y.data() + s * c + ca, y.data() + (s + 1) * c, b.data() + s * cb);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace detail

// Recurrent latent-sequence predictor. Each step runs an affine head on
// the style latent and a conv head on the content latent, feeds the
// concatenated features to an LSTM, and splits the hidden state between
// the two output heads to produce the next-step latent. The observed
// prefix is consumed first; beyond it predictions feed back in as inputs
// (except where teacher forcing supplies the ground truth during
// training).
template <typename T>
class LatentPredictor {
 public:
  LatentPredictor(const LatentDims& dims, const PredictorConfig& cfg, Rng& rng)
      : dims_(dims),
        cfg_(cfg),
        style_in_(dims.S, cfg.style_feat, rng),
        content_in_conv_(dims.C, cfg.content_conv_channels, 3, 1, 1, rng),
        content_in_fc_(cfg.content_conv_channels * dims.h * dims.w, cfg.content_feat, rng),
        lstm_(cfg.style_feat + cfg.content_feat, cfg.hidden, rng),
        style_out_(cfg.hidden / 2, dims.S, rng),
        content_out_fc_(cfg.hidden / 2, cfg.content_conv_channels * dims.h * dims.w, rng),
        content_out_conv_(cfg.content_conv_channels, dims.C, 3, 1, 1, rng) {
    cfg.validate();
  }

  const LatentDims& dims() const { return dims_; }
  const PredictorConfig& config() const { return cfg_; }

  void register_params(const std::string& prefix, nn::ParamList<T>& out) {
    style_in_.register_params(prefix + ".style_in", out);
    content_in_conv_.register_params(prefix + ".content_in_conv", out);
    content_in_fc_.register_params(prefix + ".content_in_fc", out);
    lstm_.register_params(prefix + ".lstm", out);
    style_out_.register_params(prefix + ".style_out", out);
    content_out_fc_.register_params(prefix + ".content_out_fc", out);
    content_out_conv_.register_params(prefix + ".content_out_conv", out);
  }

  void clear_caches() {
    style_in_.clear_cache();
    style_in_act_.clear_cache();
    content_in_conv_.clear_cache();
    content_in_act_.clear_cache();
    content_in_fc_.clear_cache();
    content_in_act2_.clear_cache();
    lstm_.clear_cache();
    style_out_.clear_cache();
    content_out_fc_.clear_cache();
    content_out_act_.clear_cache();
    content_out_conv_.clear_cache();
  }

  // One teacher-forced / autoregressive pass over a batch of windows.
  // zs/zc hold the ground-truth latents per time step ([N,S] and
  // [N,C,h,w], length H+P); teacher[t] says whether the input at
  // position t >= H is the ground truth or the model's own prediction.
  // Returns the mean squared prediction error over steps H..H+P-1 and,
  // when grads is true, backpropagates it.
  double train_window(const std::vector<Tensor<T>>& zs, const std::vector<Tensor<T>>& zc,
                      const std::vector<bool>& teacher, bool grads) {
    const int L = static_cast<int>(zs.size());
    const int H = cfg_.H;
    if (L != cfg_.H + cfg_.P) throw ShapeError("train_window: expected H+P steps");
    const int n = zs[0].dim(0);
    clear_caches();
    auto state = lstm_.zero_state(n);

    std::vector<Tensor<T>> pred_s(static_cast<std::size_t>(L)), pred_c(static_cast<std::size_t>(L));
    std::vector<bool> fed_back(static_cast<std::size_t>(L), false);
    for (int t = 0; t < L - 1; ++t) {
      const bool use_pred = t >= H && !teacher[static_cast<std::size_t>(t)];
      fed_back[static_cast<std::size_t>(t)] = use_pred;
      const Tensor<T>& in_s = use_pred ? pred_s[static_cast<std::size_t>(t)] : zs[static_cast<std::size_t>(t)];
      const Tensor<T>& in_c = use_pred ? pred_c[static_cast<std::size_t>(t)] : zc[static_cast<std::size_t>(t)];
      state = lstm_.step(input_features(in_s, in_c), state);
      if (t + 1 >= H) {
        auto [ps, pc] = output_heads(state.h);
        pred_s[static_cast<std::size_t>(t + 1)] = std::move(ps);
        pred_c[static_cast<std::size_t>(t + 1)] = std::move(pc);
      }
    }

    const std::int64_t denom =
        static_cast<std::int64_t>(cfg_.P) * n * (dims_.S + dims_.content_size());
    double loss = 0.0;
    std::vector<Tensor<T>> dps(static_cast<std::size_t>(L)), dpc(static_cast<std::size_t>(L));
    for (int t = H; t < L; ++t) {
      const auto& ps = pred_s[static_cast<std::size_t>(t)];
      const auto& pc = pred_c[static_cast<std::size_t>(t)];
      dps[static_cast<std::size_t>(t)] = Tensor<T>(ps.shape());
      dpc[static_cast<std::size_t>(t)] = Tensor<T>(pc.shape());
      for (std::int64_t i = 0; i < ps.size(); ++i) {
        const double d = static_cast<double>(ps[i]) - static_cast<double>(zs[static_cast<std::size_t>(t)][i]);
        loss += d * d;
        dps[static_cast<std::size_t>(t)][i] = static_cast<T>(2.0 * d / static_cast<double>(denom));
      }
      for (std::int64_t i = 0; i < pc.size(); ++i) {
        const double d = static_cast<double>(pc[i]) - static_cast<double>(zc[static_cast<std::size_t>(t)][i]);
        loss += d * d;
        dpc[static_cast<std::size_t>(t)][i] = static_cast<T>(2.0 * d / static_cast<double>(denom));
      }
    }
    loss /= static_cast<double>(denom);
    if (!grads) {
      clear_caches();
      return loss;
    }

    Tensor<T> dh({n, cfg_.hidden}), dc({n, cfg_.hidden});
    for (int t = L - 2; t >= 0; --t) {
      if (t + 1 >= H)
        dh += output_heads_backward(dps[static_cast<std::size_t>(t + 1)], dpc[static_cast<std::size_t>(t + 1)]);
      Tensor<T> df = lstm_.backward_step(dh, dc);
      auto [din_s, din_c] = input_features_backward(df);
      if (fed_back[static_cast<std::size_t>(t)]) {
        dps[static_cast<std::size_t>(t)] += din_s;
        dpc[static_cast<std::size_t>(t)] += din_c;
      }
    }
    return loss;
  }

  // Autoregressive continuation: consume the observed prefix, then feed
  // predictions back for `horizon` steps.
  void rollout(const std::vector<Tensor<T>>& prefix_s, const std::vector<Tensor<T>>& prefix_c,
               int horizon, std::vector<Tensor<T>>& out_s, std::vector<Tensor<T>>& out_c) {
    if (horizon < 1) throw ConfigError("rollout horizon must be >= 1");
    if (static_cast<int>(prefix_s.size()) != cfg_.H)
      throw ShapeError("rollout: prefix length must equal H");
    const int n = prefix_s[0].dim(0);
    clear_caches();
    auto state = lstm_.zero_state(n);
    Tensor<T> ps, pc;
    for (int t = 0; t < cfg_.H; ++t) {
      state = lstm_.step(input_features(prefix_s[static_cast<std::size_t>(t)], prefix_c[static_cast<std::size_t>(t)]), state);
      if (t == cfg_.H - 1) std::tie(ps, pc) = output_heads(state.h);
    }
    out_s.clear();
    out_c.clear();
    out_s.push_back(ps);
    out_c.push_back(pc);
    for (int k = 1; k < horizon; ++k) {
      state = lstm_.step(input_features(out_s.back(), out_c.back()), state);
      std::tie(ps, pc) = output_heads(state.h);
      out_s.push_back(ps);
      out_c.push_back(pc);
    }
    clear_caches();
  }

 private:
  Tensor<T> input_features(const Tensor<T>& zs, const Tensor<T>& zc) {
    const int n = zs.dim(0);
    Tensor<T> fs = style_in_act_.forward(style_in_.forward(zs));
    Tensor<T> conv = content_in_act_.forward(
        content_in_conv_.forward(zc.reshaped({n, dims_.C, dims_.h, dims_.w})));
    Tensor<T> fc = content_in_act2_.forward(content_in_fc_.forward(
        conv.reshaped({n, cfg_.content_conv_channels * dims_.h * dims_.w})));
    return detail::concat_cols(fs, fc);
  }

  std::pair<Tensor<T>, Tensor<T>> input_features_backward(const Tensor<T>& df) {
    auto [dfs, dfc] = detail::split_cols(df, cfg_.style_feat);
    Tensor<T> dzs = style_in_.backward(style_in_act_.backward(dfs));
    const int n = df.dim(0);
    Tensor<T> dconv = content_in_fc_.backward(content_in_act2_.backward(dfc))
                          .reshaped({n, cfg_.content_conv_channels, dims_.h, dims_.w});
    Tensor<T> dzc = content_in_conv_.backward(content_in_act_.backward(dconv));
    return {std::move(dzs), dzc.reshaped({n, dims_.C, dims_.h, dims_.w})};
  }

  std::pair<Tensor<T>, Tensor<T>> output_heads(const Tensor<T>& h) {
    const int n = h.dim(0);
    auto [h1, h2] = detail::split_cols(h, cfg_.hidden / 2);
    Tensor<T> zs = style_out_.forward(h1);
    Tensor<T> t = content_out_act_.forward(content_out_fc_.forward(h2));
    Tensor<T> zc = content_out_conv_.forward(
        t.reshaped({n, cfg_.content_conv_channels, dims_.h, dims_.w}));
    return {std::move(zs), std::move(zc)};
  }

  Tensor<T> output_heads_backward(const Tensor<T>& dzs, const Tensor<T>& dzc) {
    const int n = dzs.dim(0);
    Tensor<T> dt = content_out_conv_.backward(dzc);
    Tensor<T> dh2 = content_out_fc_.backward(content_out_act_.backward(
        dt.reshaped({n, cfg_.content_conv_channels * dims_.h * dims_.w})));
    Tensor<T> dh1 = style_out_.backward(dzs);
    return detail::concat_cols(dh1, dh2);
  }

  LatentDims dims_;
  PredictorConfig cfg_;
  nn::Linear<T> style_in_;
  nn::Tanh<T> style_in_act_;
  nn::Conv2d<T> content_in_conv_;
  nn::LeakyRelu<T> content_in_act_{0.2};
  nn::Linear<T> content_in_fc_;
  nn::Tanh<T> content_in_act2_;
  nn::LstmCell<T> lstm_;
  nn::Linear<T> style_out_;
  nn::Linear<T> content_out_fc_;
  nn::LeakyRelu<T> content_out_act_{0.2};
  nn::Conv2d<T> content_out_conv_;
};

// Mean squared error between predicted and ground-truth latent steps,
// pooled over every entry of every step.
inline double prediction_loss(const std::vector<LatentFrame>& pred,
                              const std::vector<LatentFrame>& truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction_loss: length mismatch");
  if (pred.empty()) throw ShapeError("prediction_loss: empty sequences");
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].style.size() != truth[t].style.size() ||
        pred[t].content.size() != truth[t].content.size())
      throw ShapeError("prediction_loss: dim mismatch at step " + std::to_string(t));
    for (std::size_t i = 0; i < pred[t].style.size(); ++i) {
      const double d = static_cast<double>(pred[t].style[i]) - truth[t].style[i];
      sum += d * d;
      ++n;
    }
    for (std::size_t i = 0; i < pred[t].content.size(); ++i) {
      const double d = static_cast<double>(pred[t].content[i]) - truth[t].content[i];
      sum += d * d;
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

// --- stage-2 training ----------------------------------------------------

struct PredictorTrainResult {
  double best_val_loss = 0;
  double baseline_val_loss = 0;  // constant-latent baseline on the val split
  int steps_run = 0;
  std::vector<std::array<double, 3>> log;  // step, train_loss, val_loss (-1 when not evaluated)
};

namespace detail {

struct LatentWindowSet {
  LatentDims dims;
  std::vector<LatentSequence> sequences;
  std::vector<std::pair<int, int>> windows;  // (sequence index, start)
};

inline LatentWindowSet load_latent_windows(const Manifest& latents, const std::string& split,
                                           int H, int P) {
  LatentWindowSet set;
  set.dims = LatentDims::from_json(latents.extra.at("latent_dims"));
  for (const auto& e : latents.sequences) {
    if (!split.empty() && e.split != split) continue;
    LatentSequence seq = read_latents(latents.sequence_path(e));
    if (!(seq.dims == set.dims)) throw FormatError("latent dims differ across sequences");
    const int T = static_cast<int>(seq.frames.size());
    const int idx = static_cast<int>(set.sequences.size());
    for (int t0 = 0; t0 + H + P <= T; ++t0) set.windows.emplace_back(idx, t0);
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

template <typename T>
void gather_window_batch(const LatentWindowSet& set, const std::vector<std::size_t>& which,
                         int H, int P, std::vector<Tensor<T>>& zs, std::vector<Tensor<T>>& zc) {
  const int L = H + P;
  const int n = static_cast<int>(which.size());
  const LatentDims& d = set.dims;
  zs.assign(static_cast<std::size_t>(L), Tensor<T>({n, d.S}));
  zc.assign(static_cast<std::size_t>(L), Tensor<T>({n, d.C, d.h, d.w}));
  for (int b = 0; b < n; ++b) {
    const auto [si, t0] = set.windows[which[static_cast<std::size_t>(b)]];
    const LatentSequence& seq = set.sequences[static_cast<std::size_t>(si)];
    for (int t = 0; t < L; ++t) {
      const LatentFrame& f = seq.frames[static_cast<std::size_t>(t0 + t)];
      for (int i = 0; i < d.S; ++i) zs[static_cast<std::size_t>(t)][b * d.S + i] = static_cast<T>(f.style[static_cast<std::size_t>(i)]);
      for (int i = 0; i < d.content_size(); ++i)
        zc[static_cast<std::size_t>(t)][static_cast<std::int64_t>(b) * d.content_size() + i] =
            static_cast<T>(f.content[static_cast<std::size_t>(i)]);
    }
  }
}

// Constant-latent baseline: hold z_{H-1} for every future step.
inline double constant_latent_loss(const LatentWindowSet& set, int H, int P) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& [si, t0] : set.windows) {
    const LatentSequence& seq = set.sequences[static_cast<std::size_t>(si)];
    const LatentFrame& hold = seq.frames[static_cast<std::size_t>(t0 + H - 1)];
    for (int t = H; t < H + P; ++t) {
      const LatentFrame& gt = seq.frames[static_cast<std::size_t>(t0 + t)];
      for (std::size_t i = 0; i < gt.style.size(); ++i) {
        const double d = static_cast<double>(hold.style[i]) - gt.style[i];
        sum += d * d;
        ++n;
      }
      for (std::size_t i = 0; i < gt.content.size(); ++i) {
        const double d = static_cast<double>(hold.content[i]) - gt.content[i];
        sum += d * d;
        ++n;
      }
    }
  }
  if (n == 0) throw ConfigError("no validation windows for the baseline");
  return sum / static_cast<double>(n);
}

}  // namespace detail

// Supervised stage-2 training entirely in the frozen latent space. Stops
// early once the validation loss stops improving; the best-validation
// parameters are what lands in the checkpoint.
inline PredictorTrainResult train_predictor(const Manifest& latents, const PredictorConfig& cfg,
                                            const std::filesystem::path& ckpt_path,
                                            const std::filesystem::path& log_path) {
  using T = float;
  cfg.validate();
  if (latents.kind != "latents") throw ConfigError("train_predictor expects a latent dataset");
  detail::LatentWindowSet train_set = detail::load_latent_windows(latents, "train", cfg.H, cfg.P);
  detail::LatentWindowSet val_set = detail::load_latent_windows(latents, "val", cfg.H, cfg.P);
  if (train_set.windows.empty()) throw ConfigError("empty latent dataset: no training windows");
  if (val_set.windows.empty()) throw ConfigError("empty latent dataset: no validation windows");

  Rng init_rng = Rng::stream(cfg.seed, 0x50494E49ULL);
  Rng batch_rng = Rng::stream(cfg.seed, 0x50424154ULL);
  Rng tf_rng = Rng::stream(cfg.seed, 0x50544631ULL);

  LatentPredictor<T> model(train_set.dims, cfg, init_rng);
  nn::ParamList<T> params;
  model.register_params("predictor", params);
  nn::Adam<T> opt(params, {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});

  const int L = cfg.H + cfg.P;
  auto eval_val = [&]() {
    std::vector<bool> no_teacher(static_cast<std::size_t>(L), false);
    double total = 0.0;
    std::size_t done = 0;
    while (done < val_set.windows.size()) {
      const std::size_t take = std::min<std::size_t>(cfg.batch_size, val_set.windows.size() - done);
      std::vector<std::size_t> which(take);
      for (std::size_t i = 0; i < take; ++i) which[i] = done + i;
      std::vector<Tensor<T>> zs, zc;
      detail::gather_window_batch(val_set, which, cfg.H, cfg.P, zs, zc);
      total += model.train_window(zs, zc, no_teacher, false) * static_cast<double>(take);
      done += take;
    }
    return total / static_cast<double>(val_set.windows.size());
  };

  PredictorTrainResult result;
  result.baseline_val_loss = detail::constant_latent_loss(val_set, cfg.H, cfg.P);

  std::vector<Tensor<T>> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int evals_since_best = 0;

  auto snapshot = [&]() {
    best_params.clear();
    for (const auto& p : params) best_params.push_back(*p.value);
  };
  auto save_ckpt = [&](int step) {
    json meta{{"kind", "predictor"},
              {"predictor_config", cfg.to_json()},
              {"config_hash", cfg.hash()},
              {"latent_dims", train_set.dims.to_json()},
              {"encoder_config_hash", latents.extra.value("encoder_config_hash", "")},
              {"encoder_params_hash", latents.extra.value("encoder_params_hash", "")},
              {"best_val_loss", best_val},
              {"baseline_val_loss", result.baseline_val_loss},
              {"step", step}};
    nn::ParamList<T> to_save = params;
    std::vector<Tensor<T>> saved;
    if (!best_params.empty()) {
      saved = best_params;
      for (std::size_t i = 0; i < to_save.size(); ++i) to_save[i].value = &saved[i];
    }
    save_checkpoint(ckpt_path, meta, to_save);
  };

  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw Error("cannot open log for writing: " + log_path.string());
  log << "step,train_loss,val_loss\n";
  log.precision(10);

  for (int step = 1; step <= cfg.max_steps; ++step) {
    std::vector<std::size_t> which(static_cast<std::size_t>(std::min<std::size_t>(
        cfg.batch_size, train_set.windows.size())));
    for (auto& i : which)
      i = static_cast<std::size_t>(batch_rng.uniform_int(0, static_cast<std::int64_t>(train_set.windows.size()) - 1));
    std::vector<Tensor<T>> zs, zc;
    detail::gather_window_batch(train_set, which, cfg.H, cfg.P, zs, zc);
    std::vector<bool> teacher(static_cast<std::size_t>(L), false);
    for (int t = cfg.H; t < L; ++t) teacher[static_cast<std::size_t>(t)] = tf_rng.bernoulli(cfg.teacher_forcing);

    opt.zero_grad();
    const double train_loss = model.train_window(zs, zc, teacher, true);
    if (!std::isfinite(train_loss))
      throw NumericalError("non-finite predictor loss at step " + std::to_string(step) +
                           "; last checkpoint retained");
    opt.step();
    result.steps_run = step;

    double val_loss = -1.0;
    if (step % cfg.val_every == 0 || step == cfg.max_steps) {
      val_loss = eval_val();
      if (val_loss < best_val) {
        best_val = val_loss;
        evals_since_best = 0;
        snapshot();
        save_ckpt(step);
      } else {
        ++evals_since_best;
      }
    }
    result.log.push_back({static_cast<double>(step), train_loss, val_loss});
    log << step << "," << train_loss << ",";
    if (val_loss >= 0) log << val_loss;
    log << "\n";
    if (evals_since_best >= cfg.patience) break;  // overfitting on the validation set
  }

  result.best_val_loss = best_val;
  save_ckpt(result.steps_run);
  return result;
}

// --- full prediction pipeline ---------------------------------------------

enum class PredictBaseline { None, CopyLast, ConstantLatent };

inline PredictBaseline baseline_from_string(const std::string& s) {
  if (s == "none") return PredictBaseline::None;
  if (s == "copy-last") return PredictBaseline::CopyLast;
  if (s == "constant-latent") return PredictBaseline::ConstantLatent;
  throw ConfigError("unknown baseline: " + s);
}

struct PredictOptions {
  int rollout = 0;  // 0 -> use dataset P
  std::string split = "test";
  PredictBaseline baseline = PredictBaseline::None;
};

// Encode the observed prefix of each sequence, roll the predictor
// forward, decode with the generator, and write OGMS sequences scored by
// `evaluate`. Baselines share the output format.
inline Manifest predict_ogms(const std::filesystem::path& encoder_ckpt,
                             const std::filesystem::path& generator_ckpt,
                             const std::filesystem::path& predictor_ckpt, const Manifest& dataset,
                             const PredictOptions& opt, const std::filesystem::path& out_dir) {
  using T = float;
  const int H = dataset.H;
  const int horizon = opt.rollout > 0 ? opt.rollout : dataset.P;
  std::filesystem::create_directories(out_dir);

  Manifest out;
  out.kind = "predictions";
  out.grid = dataset.grid;
  out.H = H;
  out.P = dataset.P;
  out.dt = dataset.dt;
  out.seed = dataset.seed;
  out.config_hash = dataset.config_hash;
  out.dir = out_dir;

  std::optional<ReprModels<T>> enc_models, gen_models;
  std::optional<LatentPredictor<T>> predictor;
  LatentDims dims;

  if (opt.baseline != PredictBaseline::CopyLast) {
    enc_models.emplace(load_repr_models<T>(encoder_ckpt));
    gen_models.emplace(load_repr_models<T>(generator_ckpt));
    if (enc_models->config_hash != gen_models->config_hash)
      throw ConfigError("encoder/generator checkpoint config hashes differ");
    if (!(enc_models->config.grid == dataset.grid))
      throw ConfigError("checkpoint grid does not match dataset grid");
    dims = LatentDims::from_model(enc_models->config);
  }
  if (opt.baseline == PredictBaseline::None) {
    Checkpoint pc = load_checkpoint(predictor_ckpt);
    if (pc.meta.value("kind", "") != "predictor")
      throw FormatError("not a predictor checkpoint: " + predictor_ckpt.string());
    const std::string enc_hash = pc.meta.value("encoder_config_hash", "");
    if (enc_hash != enc_models->config_hash)
      throw ConfigError("predictor was trained against a different encoder config (hash mismatch)");
    PredictorConfig pcfg = PredictorConfig::from_json(pc.meta.at("predictor_config"));
    if (pcfg.H != H) throw ConfigError("predictor H does not match dataset H");
    LatentDims pdims = LatentDims::from_json(pc.meta.at("latent_dims"));
    if (!(pdims == dims)) throw ConfigError("predictor latent dims do not match encoder");
    Rng dummy(0);
    predictor.emplace(dims, pcfg, dummy);
    nn::ParamList<T> params;
    predictor->register_params("predictor", params);
    load_params(pc, params);
    out.extra["predictor_hash"] = file_hash_hex(predictor_ckpt);
  }
  if (enc_models) {
    out.extra["encoder_hash"] = file_hash_hex(encoder_ckpt);
    out.extra["generator_hash"] = file_hash_hex(generator_ckpt);
  }
  out.extra["rollout"] = horizon;
  out.extra["baseline"] = opt.baseline == PredictBaseline::None
                              ? "none"
                              : (opt.baseline == PredictBaseline::CopyLast ? "copy-last"
                                                                           : "constant-latent");

  for (const auto& e : dataset.sequences) {
    if (!opt.split.empty() && e.split != opt.split) continue;
    const ScenarioSequence seq = read_sequence(dataset.sequence_path(e));
    if (static_cast<int>(seq.frames.size()) < H)
      throw Error("sequence shorter than H: " + e.id);

    ScenarioSequence pred;
    pred.spec = dataset.grid;
    pred.H = H;
    pred.P = dataset.P;
    const Pose last_pose = seq.ego_poses[static_cast<std::size_t>(H - 1)];

    switch (opt.baseline) {
      case PredictBaseline::CopyLast: {
        for (int k = 0; k < horizon; ++k) pred.frames.push_back(seq.frames[static_cast<std::size_t>(H - 1)]);
        break;
      }
      case PredictBaseline::ConstantLatent: {
        Tensor<T> x = ogm_to_tensor<T>(seq.frames[static_cast<std::size_t>(H - 1)]);
        PosteriorBatch<T> post = enc_models->encoder->forward(x);
        Tensor<T> decoded = gen_models->generator->forward(post.mu_style, post.mu_content);
        const Ogm frame = tensor_to_ogm(decoded, dataset.grid);
        for (int k = 0; k < horizon; ++k) pred.frames.push_back(frame);
        break;
      }
      case PredictBaseline::None: {
        std::vector<Tensor<T>> prefix_s, prefix_c;
        for (int t = 0; t < H; ++t) {
          Tensor<T> x = ogm_to_tensor<T>(seq.frames[static_cast<std::size_t>(t)]);
          PosteriorBatch<T> post = enc_models->encoder->forward(x);
          prefix_s.push_back(post.mu_style);
          prefix_c.push_back(post.mu_content);
        }
        std::vector<Tensor<T>> zs, zc;
        predictor->rollout(prefix_s, prefix_c, horizon, zs, zc);
        Tensor<T> styles({horizon, dims.S});
        Tensor<T> contents({horizon, dims.C, dims.h, dims.w});
        for (int k = 0; k < horizon; ++k) {
          for (int i = 0; i < dims.S; ++i) styles[k * dims.S + i] = zs[static_cast<std::size_t>(k)][i];
          for (int i = 0; i < dims.content_size(); ++i)
            contents[static_cast<std::int64_t>(k) * dims.content_size() + i] = zc[static_cast<std::size_t>(k)][i];
        }
        Tensor<T> decoded = gen_models->generator->forward(styles, contents);
        const std::int64_t cells = dataset.grid.cells();
        for (int k = 0; k < horizon; ++k) {
          Ogm frame(dataset.grid);
          for (std::int64_t i = 0; i < cells; ++i)
            frame.values[static_cast<std::size_t>(i)] = static_cast<float>(decoded[k * cells + i]);
          pred.frames.push_back(std::move(frame));
        }
        break;
      }
    }
    pred.ego_poses.assign(pred.frames.size(), last_pose);
    const std::string file = e.id + ".ogms";
    write_sequence(pred, out_dir / file);
    SequenceEntry oe;
    oe.id = e.id;
    oe.file = file;
    oe.frames = static_cast<int>(pred.frames.size());
    out.sequences.push_back(std::move(oe));
  }
  if (out.sequences.empty()) throw Error("no sequences in split '" + opt.split + "'");
  save_manifest(out, out_dir / kManifestFilename);
  return out;
}

}  // namespace ogp
