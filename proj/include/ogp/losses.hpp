#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ogp/models.hpp"
#include "ogp/nn/layers.hpp"

namespace ogp {

// ---------------------------------------------------------------------
// KL divergence of the diagonal-Gaussian posterior from N(0, I):
//   0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2)
// summed over the style and content latents, averaged over the batch.
template <typename T>
T kl_divergence(const PosteriorBatch<T>& post) {
  const int n = post.batch();
  double total = 0.0;
  auto accumulate = [&](const Tensor<T>& mu, const Tensor<T>& lv) {
    for (std::int64_t i = 0; i < mu.size(); ++i) {
      const double m = mu[i], l = lv[i];
      total += 0.5 * (m * m + std::exp(l) - 1.0 - l);
    }
  };
  accumulate(post.mu_style, post.logvar_style);
  accumulate(post.mu_content, post.logvar_content);
  return static_cast<T>(total / n);
}

// Accumulates d(scale * kl)/dparams into the provided gradient tensors.
template <typename T>
void kl_divergence_backward(const PosteriorBatch<T>& post, T scale, Tensor<T>& dmu_s,
                            Tensor<T>& dlv_s, Tensor<T>& dmu_c, Tensor<T>& dlv_c) {
  const T inv_n = scale / static_cast<T>(post.batch());
  auto accumulate = [&](const Tensor<T>& mu, const Tensor<T>& lv, Tensor<T>& dmu, Tensor<T>& dlv) {
    for (std::int64_t i = 0; i < mu.size(); ++i) {
      dmu[i] += inv_n * mu[i];
      dlv[i] += inv_n * T(0.5) * (std::exp(lv[i]) - T(1));
    }
  };
  accumulate(post.mu_style, post.logvar_style, dmu_s, dlv_s);
  accumulate(post.mu_content, post.logvar_content, dmu_c, dlv_c);
}

// ---------------------------------------------------------------------
enum class ReconMode { Bce, Mse, RandomFeature };

inline ReconMode recon_mode_from_string(const std::string& s) {
  if (s == "BCE") return ReconMode::Bce;
  if (s == "MSE") return ReconMode::Mse;
  if (s == "RANDOM_FEATURE") return ReconMode::RandomFeature;
  throw ConfigError("unknown reconstruction loss mode: " + s);
}

inline std::string recon_mode_to_string(ReconMode m) {
  switch (m) {
    case ReconMode::Bce: return "BCE";
    case ReconMode::Mse: return "MSE";
    case ReconMode::RandomFeature: return "RANDOM_FEATURE";
  }
  throw ConfigError("bad recon mode");
}

inline constexpr std::uint64_t kDefaultFeatureSeed = 1337;

// Fixed, randomly initialized 3-layer conv feature extractor; the mean
// squared activation distance acts as a perceptual-style reconstruction
// loss. Weights are drawn once from the documented seed and never
// updated.
template <typename T>
class RandomFeatureNet {
 public:
  explicit RandomFeatureNet(std::uint64_t seed = kDefaultFeatureSeed) : seed_(seed) {
    Rng rng(seed);
    convs_.push_back(std::make_unique<nn::Conv2d<T>>(1, 8, 3, 2, 1, rng));
    convs_.push_back(std::make_unique<nn::Conv2d<T>>(8, 16, 3, 2, 1, rng));
    convs_.push_back(std::make_unique<nn::Conv2d<T>>(16, 16, 3, 2, 1, rng));
    for (int i = 0; i < 3; ++i) acts_.emplace_back(0.2);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    clear();
    Tensor<T> f = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) f = acts_[i].forward(convs_[i]->forward(f));
    return f;
  }

  Tensor<T> backward(const Tensor<T>& dfeat) {
    Tensor<T> d = dfeat;
    for (std::size_t i = convs_.size(); i-- > 0;) d = convs_[i]->backward(acts_[i].backward(d));
    return d;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  void clear() {
    for (auto& c : convs_) c->clear_cache();
    for (auto& a : acts_) a.clear_cache();
  }
  std::uint64_t seed_;
  std::vector<std::unique_ptr<nn::Conv2d<T>>> convs_;
  std::vector<nn::LeakyRelu<T>> acts_;
};

template <typename T>
struct ReconResult {
  T loss = T(0);
  Tensor<T> dxhat;  // d(loss)/d(x_hat)
};

// Reconstruction loss between target x and generated x_hat (both
// [N,1,H,W]). BCE and MSE are per-cell means; RandomFeature is the mean
// squared distance between extractor activations.
template <typename T>
ReconResult<T> recon_loss_grad(const Tensor<T>& x, const Tensor<T>& xhat, ReconMode mode,
                               RandomFeatureNet<T>* features = nullptr) {
  if (x.shape() != xhat.shape()) throw ShapeError("recon_loss: shape mismatch");
  ReconResult<T> res;
  res.dxhat = Tensor<T>(xhat.shape());
  const std::int64_t n = x.size();
  switch (mode) {
    case ReconMode::Bce: {
      const T eps = static_cast<T>(1e-6);
      double total = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T v = std::min(std::max(xhat[i], eps), T(1) - eps);
        const T t = x[i];
        total += -(static_cast<double>(t) * std::log(static_cast<double>(v)) +
                   (1.0 - static_cast<double>(t)) * std::log(1.0 - static_cast<double>(v)));
        if (xhat[i] > eps && xhat[i] < T(1) - eps)
          res.dxhat[i] = (v - t) / (v * (T(1) - v)) / static_cast<T>(n);
      }
      res.loss = static_cast<T>(total / static_cast<double>(n));
      return res;
    }
    case ReconMode::Mse: {
      double total = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(xhat[i]) - static_cast<double>(x[i]);
        total += d * d;
        res.dxhat[i] = static_cast<T>(2.0 * d / static_cast<double>(n));
      }
      res.loss = static_cast<T>(total / static_cast<double>(n));
      return res;
    }
    case ReconMode::RandomFeature: {
      if (!features) throw ConfigError("RANDOM_FEATURE loss requires a feature extractor");
      const Tensor<T> fx = features->forward(x);       // reference activations
      const Tensor<T> fxh = features->forward(xhat);   // caches kept for backward
      const std::int64_t m = fx.size();
      Tensor<T> dfeat(fx.shape());
      double total = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const double d = static_cast<double>(fxh[i]) - static_cast<double>(fx[i]);
        total += d * d;
        dfeat[i] = static_cast<T>(2.0 * d / static_cast<double>(m));
      }
      res.loss = static_cast<T>(total / static_cast<double>(m));
      res.dxhat = features->backward(dfeat);
      return res;
    }
  }
  throw ConfigError("bad recon mode");
}

template <typename T>
T recon_loss(const Tensor<T>& x, const Tensor<T>& xhat, ReconMode mode,
             RandomFeatureNet<T>* features = nullptr) {
  return recon_loss_grad(x, xhat, mode, features).loss;
}

// ---------------------------------------------------------------------
// Non-saturating adversarial losses, averaged over every patch logit of
// every scale. log sigmoid is evaluated via softplus for stability.

namespace detail {

inline double softplus(double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); }

template <typename T>
std::int64_t total_logits(const std::vector<Tensor<T>>& maps) {
  std::int64_t n = 0;
  for (const auto& m : maps) n += m.size();
  return n;
}

}  // namespace detail

template <typename T>
struct GanGenResult {
  T loss = T(0);
  std::vector<Tensor<T>> dlogits;
};

// Generator objective: -1/2 E[log D(G(z))].
template <typename T>
GanGenResult<T> gan_generator_loss(const std::vector<Tensor<T>>& fake_logits) {
  GanGenResult<T> res;
  const std::int64_t n = detail::total_logits(fake_logits);
  double total = 0.0;
  for (const auto& m : fake_logits) {
    Tensor<T> d(m.shape());
    for (std::int64_t i = 0; i < m.size(); ++i) {
      const double l = m[i];
      total += 0.5 * detail::softplus(-l);  // -1/2 log sigmoid(l)
      d[i] = static_cast<T>(-0.5 * nn::Sigmoid<double>::sigmoid(-l) / static_cast<double>(n));
    }
    res.dlogits.push_back(std::move(d));
  }
  res.loss = static_cast<T>(total / static_cast<double>(n));
  return res;
}

template <typename T>
struct GanDiscResult {
  T loss = T(0);
  std::vector<Tensor<T>> dreal, dfake;
};

// Discriminator objective: -E[log D(x)] - E[log(1 - D(G(z)))].
template <typename T>
GanDiscResult<T> gan_discriminator_loss(const std::vector<Tensor<T>>& real_logits,
                                        const std::vector<Tensor<T>>& fake_logits) {
  GanDiscResult<T> res;
  const std::int64_t nr = detail::total_logits(real_logits);
  const std::int64_t nf = detail::total_logits(fake_logits);
  double total = 0.0;
  for (const auto& m : real_logits) {
    Tensor<T> d(m.shape());
    for (std::int64_t i = 0; i < m.size(); ++i) {
      const double l = m[i];
      total += detail::softplus(-l) / static_cast<double>(nr);
      d[i] = static_cast<T>(-nn::Sigmoid<double>::sigmoid(-l) / static_cast<double>(nr));
    }
    res.dreal.push_back(std::move(d));
  }
  for (const auto& m : fake_logits) {
    Tensor<T> d(m.shape());
    for (std::int64_t i = 0; i < m.size(); ++i) {
      const double l = m[i];
      total += detail::softplus(l) / static_cast<double>(nf);
      d[i] = static_cast<T>(nn::Sigmoid<double>::sigmoid(l) / static_cast<double>(nf));
    }
    res.dfake.push_back(std::move(d));
  }
  res.loss = static_cast<T>(total);
  return res;
}

}  // namespace ogp
