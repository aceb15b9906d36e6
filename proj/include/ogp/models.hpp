#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ogp/manifest.hpp"
#include "ogp/nn/layers.hpp"
#include "ogp/ogm.hpp"
#include "ogp/rng.hpp"
#include "ogp/serialize.hpp"
#include "ogp/tensor.hpp"

namespace ogp {

// Architecture configuration shared by encoder, generator and
// discriminator. The defaults are the desk-scale setup (64x64 grids,
// 32-dim style, 32x4x4 content); larger setups are plain config changes.
struct ModelConfig {
  GridSpec grid{64, 64, 1.0f / 3.0f};
  int style_dim = 32;                                // S
  int content_channels = 32;                         // C
  int content_hw = 4;                                // content latent is C x hw x hw
  std::vector<int> encoder_channels = {8, 12, 16, 24, 32};  // stem + one per stride-2 stage
  std::vector<int> generator_channels = {48, 32, 24, 16};   // one per 2x upsample stage
  int generator_content_conv = 32;                   // channels of the content projection
  int const_channels = 64;                           // learned constant tensor channels
  std::vector<int> disc_channels = {16, 32};         // stride-2 conv stack per scale
  int disc_scales = 2;

  int upsample_stages() const { return static_cast<int>(generator_channels.size()); }

  void validate() const {
    grid.validate();
    if (grid.width != grid.height) throw ConfigError("model grids must be square");
    if (style_dim < 1 || content_channels < 1 || content_hw < 1) throw ConfigError("bad latent dims");
    if (encoder_channels.size() < 2) throw ConfigError("need a stem plus at least one encoder stage");
    if (generator_channels.empty()) throw ConfigError("need at least one generator stage");
    if (disc_scales < 1) throw ConfigError("need at least one discriminator scale");
    if (disc_channels.empty()) throw ConfigError("need at least one discriminator channel");
    int side = content_hw;
    for (std::size_t i = 0; i + 1 < encoder_channels.size(); ++i) side *= 2;
    if (side != grid.width)
      throw ConfigError("encoder stages do not reduce the grid to the content resolution");
    side = content_hw;
    for (int i = 0; i < upsample_stages(); ++i) side *= 2;
    if (side != grid.width)
      throw ConfigError("generator stages do not upsample the content to the grid size");
    int d = grid.width >> (disc_scales - 1);
    for (std::size_t i = 0; i < disc_channels.size(); ++i) d /= 2;
    if (d < 1) throw ConfigError("discriminator stack too deep for the smallest scale");
  }

  json to_json() const {
    return json{{"grid", grid_to_json(grid)},
                {"style_dim", style_dim},
                {"content_channels", content_channels},
                {"content_hw", content_hw},
                {"encoder_channels", encoder_channels},
                {"generator_channels", generator_channels},
                {"generator_content_conv", generator_content_conv},
                {"const_channels", const_channels},
                {"disc_channels", disc_channels},
                {"disc_scales", disc_scales}};
  }

  static ModelConfig from_json(const json& j) {
    ModelConfig c;
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    c.style_dim = j.value("style_dim", c.style_dim);
    c.content_channels = j.value("content_channels", c.content_channels);
    c.content_hw = j.value("content_hw", c.content_hw);
    c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
    c.generator_channels = j.value("generator_channels", c.generator_channels);
    c.generator_content_conv = j.value("generator_content_conv", c.generator_content_conv);
    c.const_channels = j.value("const_channels", c.const_channels);
    c.disc_channels = j.value("disc_channels", c.disc_channels);
    c.disc_scales = j.value("disc_scales", c.disc_scales);
    c.validate();
    return c;
  }

  std::string hash() const { return hash_hex(fnv1a64(to_json().dump())); }
};

// Per-latent Gaussian parameters for a batch of inputs.
template <typename T>
struct PosteriorBatch {
  Tensor<T> mu_style, logvar_style;      // [N,S]
  Tensor<T> mu_content, logvar_content;  // [N,C,h,w]
  int batch() const { return mu_style.dim(0); }
};

template <typename T>
struct LatentBatch {
  Tensor<T> style;    // [N,S]
  Tensor<T> content;  // [N,C,h,w]
  int batch() const { return style.dim(0); }
};

inline constexpr double kLogvarClamp = 10.0;

namespace detail {

template <typename T>
void clamp_logvar(Tensor<T>& lv, Tensor<std::uint8_t>& mask) {
  mask = Tensor<std::uint8_t>(lv.shape());
  for (std::int64_t i = 0; i < lv.size(); ++i) {
    if (lv[i] > static_cast<T>(kLogvarClamp)) {
      lv[i] = static_cast<T>(kLogvarClamp);
      mask[i] = 0;
    } else if (lv[i] < static_cast<T>(-kLogvarClamp)) {
      lv[i] = static_cast<T>(-kLogvarClamp);
      mask[i] = 0;
    } else {
      mask[i] = 1;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------
// Residual downsampling block: conv-relu-conv plus a projected skip.
template <typename T>
class ResBlock {
 public:
  ResBlock(int cin, int cout, int stride, Rng& rng)
      : conv1_(cin, cout, 3, stride, 1, rng),
        conv2_(cout, cout, 3, 1, 1, rng),
        project_(cin != cout || stride != 1) {
    if (project_) skip_ = std::make_unique<nn::Conv2d<T>>(cin, cout, 1, stride, 0, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> main = conv2_.forward(relu1_.forward(conv1_.forward(x)));
    Tensor<T> sk = project_ ? skip_->forward(x) : x;
    main += sk;
    return relu2_.forward(main);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> d = relu2_.backward(dy);
    Tensor<T> dx = conv1_.backward(relu1_.backward(conv2_.backward(d)));
    if (project_)
      dx += skip_->backward(d);
    else
      dx += d;
    return dx;
  }

  void register_params(const std::string& prefix, nn::ParamList<T>& out) {
    conv1_.register_params(prefix + ".conv1", out);
    conv2_.register_params(prefix + ".conv2", out);
    if (project_) skip_->register_params(prefix + ".skip", out);
  }

  void clear_cache() {
    conv1_.clear_cache();
    conv2_.clear_cache();
    relu1_.clear_cache();
    relu2_.clear_cache();
    if (project_) skip_->clear_cache();
  }

 private:
  nn::Conv2d<T> conv1_, conv2_;
  nn::Relu<T> relu1_, relu2_;
  bool project_;
  std::unique_ptr<nn::Conv2d<T>> skip_;
};

// ---------------------------------------------------------------------
// Residual convolutional encoder with a pooled affine head for the style
// posterior and a convolutional head for the content posterior.
template <typename T>
class Encoder {
 public:
  Encoder(const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg),
        stem_(1, cfg.encoder_channels[0], 3, 1, 1, rng),
        style_head_(cfg.encoder_channels.back(), 2 * cfg.style_dim, rng),
        content_head_(cfg.encoder_channels.back(), 2 * cfg.content_channels, 3, 1, 1, rng) {
    cfg.validate();
    for (std::size_t i = 0; i + 1 < cfg.encoder_channels.size(); ++i)
      blocks_.push_back(
          std::make_unique<ResBlock<T>>(cfg.encoder_channels[i], cfg.encoder_channels[i + 1], 2, rng));
  }

  PosteriorBatch<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.grid.height || x.dim(3) != cfg_.grid.width)
      throw ShapeError("Encoder: bad input " + shape_str(x.shape()));
    clear_caches();
    const int n = x.dim(0);
    Tensor<T> f = stem_relu_.forward(stem_.forward(x));
    for (auto& b : blocks_) f = b->forward(f);

    Tensor<T> pooled = gap_.forward(f);
    Tensor<T> style_out = style_head_.forward(pooled);  // [N, 2S]
    Tensor<T> content_out = content_head_.forward(f);   // [N, 2C, h, w]

    PosteriorBatch<T> post;
    const int s = cfg_.style_dim, c = cfg_.content_channels, hw = cfg_.content_hw;
    post.mu_style = Tensor<T>({n, s});
    post.logvar_style = Tensor<T>({n, s});
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < s; ++i) {
        post.mu_style[b * s + i] = style_out[b * 2 * s + i];
        post.logvar_style[b * s + i] = style_out[b * 2 * s + s + i];
      }
    auto parts = nn::split_channels(content_out, c);
    post.mu_content = std::move(parts.first);
    post.logvar_content = std::move(parts.second);
    post.mu_content = post.mu_content.reshaped({n, c, hw, hw});
    post.logvar_content = post.logvar_content.reshaped({n, c, hw, hw});
    detail::clamp_logvar(post.logvar_style, style_mask_);
    detail::clamp_logvar(post.logvar_content, content_mask_);
    return post;
  }

  Tensor<T> backward(const Tensor<T>& dmu_s, const Tensor<T>& dlv_s_in, const Tensor<T>& dmu_c,
                     const Tensor<T>& dlv_c_in) {
    const int n = dmu_s.dim(0), s = cfg_.style_dim, c = cfg_.content_channels, hw = cfg_.content_hw;
    Tensor<T> dlv_s = dlv_s_in;
    for (std::int64_t i = 0; i < dlv_s.size(); ++i)
      if (!style_mask_[i]) dlv_s[i] = T(0);
    Tensor<T> dlv_c = dlv_c_in;
    for (std::int64_t i = 0; i < dlv_c.size(); ++i)
      if (!content_mask_[i]) dlv_c[i] = T(0);

    Tensor<T> dstyle_out({n, 2 * s});
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < s; ++i) {
        dstyle_out[b * 2 * s + i] = dmu_s[b * s + i];
        dstyle_out[b * 2 * s + s + i] = dlv_s[b * s + i];
      }
    Tensor<T> dcontent_out = nn::concat_channels(dmu_c.reshaped({n, c, hw, hw}),
                                                 dlv_c.reshaped({n, c, hw, hw}));

    Tensor<T> dtrunk = content_head_.backward(dcontent_out);
    dtrunk += gap_.backward(style_head_.backward(dstyle_out));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dtrunk = (*it)->backward(dtrunk);
    return stem_.backward(stem_relu_.backward(dtrunk));
  }

  void register_params(const std::string& prefix, nn::ParamList<T>& out) {
    stem_.register_params(prefix + ".stem", out);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i]->register_params(prefix + ".block" + std::to_string(i), out);
    style_head_.register_params(prefix + ".style_head", out);
    content_head_.register_params(prefix + ".content_head", out);
  }

  void clear_caches() {
    stem_.clear_cache();
    stem_relu_.clear_cache();
    for (auto& b : blocks_) b->clear_cache();
    gap_.clear_cache();
    style_head_.clear_cache();
    content_head_.clear_cache();
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::Conv2d<T> stem_;
  nn::Relu<T> stem_relu_;
  std::vector<std::unique_ptr<ResBlock<T>>> blocks_;
  nn::GlobalAvgPool<T> gap_;
  nn::Linear<T> style_head_;
  nn::Conv2d<T> content_head_;
  Tensor<std::uint8_t> style_mask_, content_mask_;
};

// ---------------------------------------------------------------------
// Style-modulated generator. The content latent is projected by a conv
// and concatenated with a learned constant tensor; upsampling conv
// blocks follow, each normalized and re-styled from the style latent,
// with a final sigmoid squashing into [0,1].
template <typename T>
class Generator {
 public:
  Generator(const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg),
        content_conv_(cfg.content_channels, cfg.generator_content_conv, 3, 1, 1, rng),
        const_input_(cfg.const_channels, cfg.content_hw, cfg.content_hw, rng),
        out_conv_(cfg.generator_channels.back(), 1, 3, 1, 1, rng) {
    cfg.validate();
    int ch = cfg.generator_content_conv + cfg.const_channels;
    for (int i = 0; i < cfg.upsample_stages(); ++i) {
      stages_.push_back(std::make_unique<Stage>(ch, cfg.generator_channels[i], cfg.style_dim, rng));
      ch = cfg.generator_channels[i];
    }
  }

  Tensor<T> forward(const Tensor<T>& style, const Tensor<T>& content) {
    if (style.ndim() != 2 || style.dim(1) != cfg_.style_dim)
      throw ShapeError("Generator: bad style input " + shape_str(style.shape()));
    if (content.ndim() != 4 || content.dim(1) != cfg_.content_channels ||
        content.dim(2) != cfg_.content_hw || content.dim(3) != cfg_.content_hw)
      throw ShapeError("Generator: bad content input " + shape_str(content.shape()));
    clear_caches();
    const int n = style.dim(0);
    Tensor<T> f = nn::concat_channels(content_conv_.forward(content), const_input_.forward(n));
    for (auto& st : stages_) f = st->forward(f, style);
    return out_act_.forward(out_conv_.forward(f));
  }

  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
    const int n = dy.dim(0);
    Tensor<T> dstyle({n, cfg_.style_dim});
    Tensor<T> df = out_conv_.backward(out_act_.backward(dy));
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) df = (*it)->backward(df, dstyle);
    auto [dproj, dconst] = nn::split_channels(df, cfg_.generator_content_conv);
    const_input_.backward(dconst);
    Tensor<T> dcontent = content_conv_.backward(dproj);
    return {std::move(dstyle), std::move(dcontent)};
  }

  void register_params(const std::string& prefix, nn::ParamList<T>& out) {
    content_conv_.register_params(prefix + ".content_conv", out);
    const_input_.register_params(prefix + ".const", out);
    for (std::size_t i = 0; i < stages_.size(); ++i)
      stages_[i]->register_params(prefix + ".stage" + std::to_string(i), out);
    out_conv_.register_params(prefix + ".out_conv", out);
  }

  void clear_caches() {
    content_conv_.clear_cache();
    for (auto& st : stages_) st->clear_cache();
    out_conv_.clear_cache();
    out_act_.clear_cache();
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Stage {
    Stage(int cin, int cout, int style_dim, Rng& rng)
        : conv(cin, cout, 3, 1, 1, rng), norm(cout, style_dim, rng) {}

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& style) {
      return act.forward(norm.forward(conv.forward(up.forward(x)), style));
    }
    Tensor<T> backward(const Tensor<T>& dy, Tensor<T>& dstyle) {
      return up.backward(conv.backward(norm.backward(act.backward(dy), dstyle)));
    }
    void register_params(const std::string& prefix, nn::ParamList<T>& out) {
      conv.register_params(prefix + ".conv", out);
      norm.register_params(prefix + ".norm", out);
    }
    void clear_cache() {
      up.clear_cache();
      conv.clear_cache();
      norm.clear_cache();
      act.clear_cache();
    }

    nn::Upsample2x<T> up;
    nn::Conv2d<T> conv;
    nn::StyleNorm<T> norm;
    nn::LeakyRelu<T> act{0.2};
  };

  ModelConfig cfg_;
  nn::Conv2d<T> content_conv_;
  nn::ConstantInput<T> const_input_;
  std::vector<std::unique_ptr<Stage>> stages_;
  nn::Conv2d<T> out_conv_;
  nn::Sigmoid<T> out_act_;
};

// ---------------------------------------------------------------------
// Multi-scale patch discriminator: the input pyramid is scored by one
// conv stack per scale, each emitting a map of per-patch logits.
template <typename T>
class Discriminator {
 public:
  Discriminator(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    for (int s = 0; s < cfg.disc_scales; ++s) scales_.push_back(std::make_unique<Scale>(cfg, s, rng));
  }

  std::vector<Tensor<T>> forward(const Tensor<T>& x) {
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.grid.height || x.dim(3) != cfg_.grid.width)
      throw ShapeError("Discriminator: bad input " + shape_str(x.shape()));
    for (auto& s : scales_) s->clear_cache();
    std::vector<Tensor<T>> logits;
    logits.reserve(scales_.size());
    for (auto& s : scales_) logits.push_back(s->forward(x));
    return logits;
  }

  Tensor<T> backward(const std::vector<Tensor<T>>& dlogits) {
    if (dlogits.size() != scales_.size()) throw ShapeError("Discriminator: wrong logit map count");
    Tensor<T> dx;
    for (std::size_t i = 0; i < scales_.size(); ++i) {
      Tensor<T> d = scales_[i]->backward(dlogits[i]);
      if (dx.empty())
        dx = std::move(d);
      else
        dx += d;
    }
    return dx;
  }

  void register_params(const std::string& prefix, nn::ParamList<T>& out) {
    for (std::size_t i = 0; i < scales_.size(); ++i)
      scales_[i]->register_params(prefix + ".scale" + std::to_string(i), out);
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Scale {
    Scale(const ModelConfig& cfg, int scale, Rng& rng) {
      for (int i = 0; i < scale; ++i) pools.emplace_back();
      int cin = 1;
      for (int ch : cfg.disc_channels) {
        convs.push_back(std::make_unique<nn::Conv2d<T>>(cin, ch, 4, 2, 1, rng));
        acts.emplace_back(0.2);
        cin = ch;
      }
      head = std::make_unique<nn::Conv2d<T>>(cin, 1, 3, 1, 1, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
      Tensor<T> f = x;
      for (auto& p : pools) f = p.forward(f);
      for (std::size_t i = 0; i < convs.size(); ++i) f = acts[i].forward(convs[i]->forward(f));
      return head->forward(f);
    }
    Tensor<T> backward(const Tensor<T>& dy) {
      Tensor<T> d = head->backward(dy);
      for (std::size_t i = convs.size(); i-- > 0;) d = convs[i]->backward(acts[i].backward(d));
      for (std::size_t i = pools.size(); i-- > 0;) d = pools[i].backward(d);
      return d;
    }
    void register_params(const std::string& prefix, nn::ParamList<T>& out) {
      for (std::size_t i = 0; i < convs.size(); ++i)
        convs[i]->register_params(prefix + ".conv" + std::to_string(i), out);
      head->register_params(prefix + ".head", out);
    }
    void clear_cache() {
      for (auto& p : pools) p.clear_cache();
      for (auto& c : convs) c->clear_cache();
      for (auto& a : acts) a.clear_cache();
      head->clear_cache();
    }

    std::vector<nn::AvgPool2x<T>> pools;
    std::vector<std::unique_ptr<nn::Conv2d<T>>> convs;
    std::vector<nn::LeakyRelu<T>> acts;
    std::unique_ptr<nn::Conv2d<T>> head;
  };

  ModelConfig cfg_;
  std::vector<std::unique_ptr<Scale>> scales_;
};

// ---------------------------------------------------------------------
// Reparameterization z = mu + exp(logvar/2) * eps with cached noise so
// gradients can be routed back to the posterior parameters.
template <typename T>
struct ReparamCache {
  Tensor<T> eps_style, eps_content;
  Tensor<T> std_style, std_content;
};

template <typename T>
LatentBatch<T> reparameterize(const PosteriorBatch<T>& post, Rng& rng, ReparamCache<T>* cache = nullptr) {
  LatentBatch<T> z;
  z.style = Tensor<T>(post.mu_style.shape());
  z.content = Tensor<T>(post.mu_content.shape());
  Tensor<T> eps_s(post.mu_style.shape()), eps_c(post.mu_content.shape());
  Tensor<T> std_s(post.mu_style.shape()), std_c(post.mu_content.shape());
  for (std::int64_t i = 0; i < z.style.size(); ++i) {
    eps_s[i] = static_cast<T>(rng.normal());
    std_s[i] = std::exp(post.logvar_style[i] / T(2));
    z.style[i] = post.mu_style[i] + std_s[i] * eps_s[i];
  }
  for (std::int64_t i = 0; i < z.content.size(); ++i) {
    eps_c[i] = static_cast<T>(rng.normal());
    std_c[i] = std::exp(post.logvar_content[i] / T(2));
    z.content[i] = post.mu_content[i] + std_c[i] * eps_c[i];
  }
  if (cache) {
    cache->eps_style = std::move(eps_s);
    cache->eps_content = std::move(eps_c);
    cache->std_style = std::move(std_s);
    cache->std_content = std::move(std_c);
  }
  return z;
}

// Gradients through the reparameterization: dmu += dz,
// dlogvar += dz * eps * std / 2.
template <typename T>
void reparameterize_backward(const ReparamCache<T>& cache, const Tensor<T>& dz_style,
                             const Tensor<T>& dz_content, Tensor<T>& dmu_s, Tensor<T>& dlv_s,
                             Tensor<T>& dmu_c, Tensor<T>& dlv_c) {
  for (std::int64_t i = 0; i < dz_style.size(); ++i) {
    dmu_s[i] += dz_style[i];
    dlv_s[i] += dz_style[i] * cache.eps_style[i] * cache.std_style[i] / T(2);
  }
  for (std::int64_t i = 0; i < dz_content.size(); ++i) {
    dmu_c[i] += dz_content[i];
    dlv_c[i] += dz_content[i] * cache.eps_content[i] * cache.std_content[i] / T(2);
  }
}

// --- single-grid convenience wrappers ---------------------------------

template <typename T>
Tensor<T> ogm_to_tensor(const Ogm& ogm) {
  Tensor<T> x({1, 1, ogm.spec.height, ogm.spec.width});
  for (std::int64_t i = 0; i < ogm.spec.cells(); ++i)
    x[i] = static_cast<T>(ogm.values[static_cast<std::size_t>(i)]);
  return x;
}

template <typename T>
Ogm tensor_to_ogm(const Tensor<T>& x, const GridSpec& spec) {
  Ogm ogm(spec);
  for (std::int64_t i = 0; i < spec.cells(); ++i)
    ogm.values[static_cast<std::size_t>(i)] = static_cast<float>(x[i]);
  return ogm;
}

// --- checkpoint container ----------------------------------------------
//
//   magic "OGPC", version u16 = 1,
//   u32 meta_len, meta JSON (kind, model config, config hash, ...),
//   u32 n_tensors, then per tensor: u32 name_len, name, u32 ndim,
//   u32 dims..., f32 data; crc32 trailer over all preceding bytes.

inline constexpr char kCheckpointMagic[4] = {'O', 'G', 'P', 'C'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  json meta;
  std::map<std::string, Tensor<float>> tensors;

  std::string config_hash() const { return meta.value("config_hash", ""); }

  // Hash of the parameter payload only (names, shapes, raw f32 bytes);
  // proves parameters are byte-identical across files.
  std::string params_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& [name, t] : tensors) {
      h = fnv1a64(name.data(), name.size(), h);
      h = fnv1a64(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float), h);
    }
    return hash_hex(h);
  }
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const json& meta,
                     const nn::ParamList<T>& params) {
  BinWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  const std::string meta_str = meta.dump();
  w.u32(static_cast<std::uint32_t>(meta_str.size()));
  w.str(meta_str);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value->ndim()));
    for (int i = 0; i < p.value->ndim(); ++i) w.u32(static_cast<std::uint32_t>(p.value->dim(i)));
    for (std::int64_t i = 0; i < p.value->size(); ++i) w.f32(static_cast<float>((*p.value)[i]));
  }
  w.u32(w.crc32_all());
  w.write_file(path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  BinReader r = BinReader::from_file(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw BadMagicError("not a checkpoint file: " + path.string());
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw BadVersionError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const std::uint32_t meta_len = r.u32();
  const std::string meta_str = r.str(meta_len);
  try {
    ckpt.meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint meta: ") + e.what());
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t k = 0; k < n_tensors; ++k) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(r.u32());
    Tensor<float> t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.f32();
    ckpt.tensors.emplace(name, std::move(t));
  }
  const std::uint32_t expect = r.crc32_prefix();
  if (r.u32() != expect) throw ChecksumError("checkpoint checksum mismatch: " + path.string());
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint trailer");
  return ckpt;
}

// Strict by-name parameter load: every registered parameter must be
// present with a matching shape.
template <typename T>
void load_params(const Checkpoint& ckpt, const nn::ParamList<T>& params) {
  for (const auto& p : params) {
    auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end()) throw FormatError("checkpoint missing tensor: " + p.name);
    if (it->second.shape() != p.value->shape())
      throw ShapeError("checkpoint tensor shape mismatch: " + p.name);
    for (std::int64_t i = 0; i < p.value->size(); ++i)
      (*p.value)[i] = static_cast<T>(it->second[i]);
  }
}

}  // namespace ogp
