#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ogp/losses.hpp"
#include "ogp/manifest.hpp"
#include "ogp/models.hpp"
#include "ogp/nn/adam.hpp"

namespace ogp {

enum class ReprMode { Vae, VaeGan };

inline ReprMode repr_mode_from_string(const std::string& s) {
  if (s == "VAE") return ReprMode::Vae;
  if (s == "VAE-GAN") return ReprMode::VaeGan;
  throw ConfigError("unknown representation training mode: " + s);
}

inline std::string repr_mode_to_string(ReprMode m) {
  return m == ReprMode::Vae ? "VAE" : "VAE-GAN";
}

struct ReprTrainConfig {
  ReprMode mode = ReprMode::Vae;
  double beta = 1.0;
  ReconMode recon = ReconMode::Bce;
  double lr = 1e-3;
  double lr_disc = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  int batch_size = 8;
  int steps = 500;
  int checkpoint_every = 250;
  std::uint64_t seed = 1;
  std::uint64_t feature_seed = kDefaultFeatureSeed;
  ModelConfig model;

  void validate() const {
    if (beta < 0) throw ConfigError("beta must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    model.validate();
  }

  json to_json() const {
    return json{{"mode", repr_mode_to_string(mode)},
                {"beta", beta},
                {"recon_loss", recon_mode_to_string(recon)},
                {"lr", lr},
                {"lr_disc", lr_disc},
                {"adam_beta1", adam_beta1},
                {"adam_beta2", adam_beta2},
                {"adam_eps", adam_eps},
                {"batch_size", batch_size},
                {"steps", steps},
                {"checkpoint_every", checkpoint_every},
                {"seed", seed},
                {"feature_seed", feature_seed},
                {"model", model.to_json()}};
  }

  static ReprTrainConfig from_json(const json& j) {
    ReprTrainConfig c;
    if (j.contains("mode")) c.mode = repr_mode_from_string(j.at("mode").get<std::string>());
    c.beta = j.value("beta", c.beta);
    if (j.contains("recon_loss")) c.recon = recon_mode_from_string(j.at("recon_loss").get<std::string>());
    c.lr = j.value("lr", c.lr);
    c.lr_disc = j.value("lr_disc", c.lr);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.seed = j.value("seed", c.seed);
    c.feature_seed = j.value("feature_seed", c.feature_seed);
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    c.validate();
    return c;
  }
};

struct ReprLogRow {
  int step = 0;
  double recon = 0, kl = 0, vae_total = 0;
  double g_loss = 0, d_loss = 0, total = 0;
};

struct ReprTrainResult {
  std::vector<ReprLogRow> log;
  std::string checkpoint_hash;
};

namespace detail {

// All frames of the requested split, loaded once into memory.
inline std::vector<Ogm> load_split_frames(const Manifest& dataset, const std::string& split) {
  std::vector<Ogm> frames;
  for (const auto& e : dataset.sequences) {
    if (!split.empty() && e.split != split) continue;
    ScenarioSequence seq = read_sequence(dataset.sequence_path(e));
    for (auto& f : seq.frames) frames.push_back(std::move(f));
  }
  return frames;
}

template <typename T>
Tensor<T> make_batch(const std::vector<Ogm>& frames, const std::vector<std::size_t>& idx,
                     const GridSpec& grid) {
  Tensor<T> x({static_cast<int>(idx.size()), 1, grid.height, grid.width});
  const std::int64_t cells = grid.cells();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Ogm& f = frames[idx[b]];
    if (!(f.spec == grid)) throw ShapeError("frame spec does not match model grid");
    for (std::int64_t i = 0; i < cells; ++i)
      x[static_cast<std::int64_t>(b) * cells + i] = static_cast<T>(f.values[static_cast<std::size_t>(i)]);
  }
  return x;
}

inline void write_repr_log(const std::filesystem::path& path, const std::vector<ReprLogRow>& rows,
                           ReprMode mode) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open log for writing: " + path.string());
  os.precision(10);
  if (mode == ReprMode::Vae) {
    os << "step,recon,kl,total\n";
    for (const auto& r : rows) os << r.step << "," << r.recon << "," << r.kl << "," << r.total << "\n";
  } else {
    os << "step,recon,kl,vae_total,g_loss,d_loss,total\n";
    for (const auto& r : rows)
      os << r.step << "," << r.recon << "," << r.kl << "," << r.vae_total << "," << r.g_loss << ","
         << r.d_loss << "," << r.total << "\n";
  }
}

}  // namespace detail

// Stage-1 representation learning. Trains encoder + generator on frames
// of the train split (plus a discriminator in VAE-GAN mode, alternating
// one discriminator step and one encoder/generator step). Writes the
// checkpoint to `ckpt_path` every `checkpoint_every` steps and at the
// end, and the loss log CSV next to it. Deterministic for a fixed seed
// and single worker.
inline ReprTrainResult train_representation(const Manifest& dataset, const ReprTrainConfig& cfg,
                                            const std::filesystem::path& ckpt_path,
                                            const std::filesystem::path& log_path) {
  using T = float;
  cfg.validate();
  if (!(dataset.grid == cfg.model.grid))
    throw ConfigError("dataset grid does not match model grid");
  const std::vector<Ogm> frames = detail::load_split_frames(dataset, "train");
  if (frames.empty()) throw ConfigError("train split has no frames");

  Rng init_rng = Rng::stream(cfg.seed, 0x494E4954ULL);   // "INIT"
  Rng batch_rng = Rng::stream(cfg.seed, 0x42415443ULL);  // "BATC"
  Rng noise_rng = Rng::stream(cfg.seed, 0x4E4F4953ULL);  // "NOIS"

  Encoder<T> encoder(cfg.model, init_rng);
  Generator<T> generator(cfg.model, init_rng);
  std::optional<Discriminator<T>> disc;
  if (cfg.mode == ReprMode::VaeGan) disc.emplace(cfg.model, init_rng);
  std::optional<RandomFeatureNet<T>> features;
  if (cfg.recon == ReconMode::RandomFeature) features.emplace(cfg.feature_seed);

  nn::ParamList<T> gen_params;
  encoder.register_params("encoder", gen_params);
  generator.register_params("generator", gen_params);
  nn::Adam<T> opt_g(gen_params, {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  std::optional<nn::Adam<T>> opt_d;
  nn::ParamList<T> disc_params;
  if (disc) {
    disc->register_params("discriminator", disc_params);
    opt_d.emplace(disc_params, nn::AdamConfig{cfg.lr_disc, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  }

  auto save = [&](int step) {
    nn::ParamList<T> all = gen_params;
    all.insert(all.end(), disc_params.begin(), disc_params.end());
    json meta{{"kind", "representation"},
              {"mode", repr_mode_to_string(cfg.mode)},
              {"model_config", cfg.model.to_json()},
              {"config_hash", cfg.model.hash()},
              {"train_config", cfg.to_json()},
              {"step", step}};
    save_checkpoint(ckpt_path, meta, all);
  };

  ReprTrainResult result;
  const int s_dim = cfg.model.style_dim;
  const int c_ch = cfg.model.content_channels, c_hw = cfg.model.content_hw;

  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
    for (auto& i : idx)
      i = static_cast<std::size_t>(batch_rng.uniform_int(0, static_cast<std::int64_t>(frames.size()) - 1));
    Tensor<T> x = detail::make_batch<T>(frames, idx, cfg.model.grid);
    const int n = cfg.batch_size;

    ReprLogRow row;
    row.step = step;

    if (disc) {
      // Discriminator step on real frames vs reconstructions (no
      // gradient flows into the generator here).
      opt_d->zero_grad();
      PosteriorBatch<T> post = encoder.forward(x);
      LatentBatch<T> z = reparameterize(post, noise_rng);
      Tensor<T> x_fake = generator.forward(z.style, z.content);

      // Score real, backprop its term, then the same for fake; the
      // per-scale caches only hold one pass at a time.
      std::vector<Tensor<T>> real_maps = disc->forward(x);
      GanDiscResult<T> real_part = gan_discriminator_loss(real_maps, {});
      disc->backward(real_part.dreal);
      std::vector<Tensor<T>> fake_maps = disc->forward(x_fake);
      GanDiscResult<T> fake_part = gan_discriminator_loss({}, fake_maps);
      disc->backward(fake_part.dfake);
      row.d_loss = static_cast<double>(real_part.loss) + static_cast<double>(fake_part.loss);
      opt_d->step();
    }

    // Encoder/generator step.
    opt_g.zero_grad();
    PosteriorBatch<T> post = encoder.forward(x);
    ReparamCache<T> rcache;
    LatentBatch<T> z = reparameterize(post, noise_rng, &rcache);
    Tensor<T> x_hat = generator.forward(z.style, z.content);

    ReconResult<T> rec = recon_loss_grad(x, x_hat, cfg.recon, features ? &*features : nullptr);
    const T kl = kl_divergence(post);
    row.recon = rec.loss;
    row.kl = kl;
    row.vae_total = row.recon + cfg.beta * row.kl;

    Tensor<T> dxhat = rec.dxhat;
    if (disc) {
      std::vector<Tensor<T>> fake_maps = disc->forward(x_hat);
      GanGenResult<T> gres = gan_generator_loss(fake_maps);
      row.g_loss = gres.loss;
      dxhat += disc->backward(gres.dlogits);
    }
    row.total = row.vae_total + row.g_loss;

    auto [dz_style, dz_content] = generator.backward(dxhat);
    Tensor<T> dmu_s({n, s_dim}), dlv_s({n, s_dim});
    Tensor<T> dmu_c({n, c_ch, c_hw, c_hw}), dlv_c({n, c_ch, c_hw, c_hw});
    kl_divergence_backward(post, static_cast<T>(cfg.beta), dmu_s, dlv_s, dmu_c, dlv_c);
    reparameterize_backward(rcache, dz_style, dz_content, dmu_s, dlv_s, dmu_c, dlv_c);
    encoder.backward(dmu_s, dlv_s, dmu_c, dlv_c);
    opt_g.step();

    if (!std::isfinite(row.total) || !std::isfinite(row.d_loss)) {
      detail::write_repr_log(log_path, result.log, cfg.mode);
      throw NumericalError("non-finite loss at step " + std::to_string(step) +
                           "; last periodic checkpoint retained");
    }
    result.log.push_back(row);

    if (step % cfg.checkpoint_every == 0) save(step);
  }

  save(cfg.steps);
  detail::write_repr_log(log_path, result.log, cfg.mode);
  result.checkpoint_hash = file_hash_hex(ckpt_path);
  return result;
}

// --- checkpoint reload helpers ----------------------------------------

template <typename T>
struct ReprModels {
  ModelConfig config;
  std::unique_ptr<Encoder<T>> encoder;
  std::unique_ptr<Generator<T>> generator;
  std::string config_hash;
  std::string encoder_params_hash;
};

// Rebuild encoder/generator from a stage-1 checkpoint. Initialization is
// immediately overwritten by the stored parameters.
template <typename T>
ReprModels<T> load_repr_models(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "representation")
    throw FormatError("not a representation checkpoint: " + path.string());
  ReprModels<T> out;
  out.config = ModelConfig::from_json(ckpt.meta.at("model_config"));
  out.config_hash = ckpt.config_hash();
  Rng dummy(0);
  out.encoder = std::make_unique<Encoder<T>>(out.config, dummy);
  out.generator = std::make_unique<Generator<T>>(out.config, dummy);
  nn::ParamList<T> params;
  out.encoder->register_params("encoder", params);
  out.generator->register_params("generator", params);
  load_params(ckpt, params);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("encoder.", 0) != 0 && name.rfind("generator.", 0) != 0) continue;
    h = fnv1a64(name.data(), name.size(), h);
    h = fnv1a64(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float), h);
  }
  out.encoder_params_hash = hash_hex(h);
  return out;
}

}  // namespace ogp
