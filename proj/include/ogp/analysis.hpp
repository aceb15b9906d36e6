#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ogp/metrics.hpp"
#include "ogp/png.hpp"
#include "ogp/predictor.hpp"
#include "ogp/repr_train.hpp"

namespace ogp {

// --- grid statistics -----------------------------------------------------

struct OccupiedStats {
  int count = 0;
  double centroid_row = 0, centroid_col = 0;  // valid only when count > 0
};

inline OccupiedStats occupied_stats(const Ogm& ogm, Thresholds th = {}) {
  const ClassGrid cg = classify(ogm, th.t_free, th.t_occ);
  OccupiedStats s;
  double sr = 0, sc = 0;
  for (int r = 0; r < cg.spec.height; ++r)
    for (int c = 0; c < cg.spec.width; ++c)
      if (cg.at(r, c) == CellClass::Occupied) {
        ++s.count;
        sr += r;
        sc += c;
      }
  if (s.count > 0) {
    s.centroid_row = sr / s.count;
    s.centroid_col = sc / s.count;
  }
  return s;
}

inline std::array<double, 3> class_histogram(const Ogm& ogm, Thresholds th = {}) {
  const ClassGrid cg = classify(ogm, th.t_free, th.t_occ);
  std::array<double, 3> hist{0, 0, 0};
  for (CellClass c : cg.classes) hist[static_cast<std::size_t>(c)] += 1.0;
  for (auto& v : hist) v /= static_cast<double>(cg.spec.cells());
  return hist;
}

// --- montage -------------------------------------------------------------

// Tiled grayscale montage of grids, with 2px separators; values map 0 ->
// black, 1 -> white.
inline void write_montage(const std::vector<Ogm>& grids, int tiles_per_row,
                          const std::filesystem::path& path) {
  if (grids.empty()) throw Error("write_montage: no grids");
  const GridSpec spec = grids[0].spec;
  const int gap = 2;
  const int rows = (static_cast<int>(grids.size()) + tiles_per_row - 1) / tiles_per_row;
  const int W = tiles_per_row * spec.width + (tiles_per_row + 1) * gap;
  const int H = rows * spec.height + (rows + 1) * gap;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(W) * H, 32);
  for (std::size_t k = 0; k < grids.size(); ++k) {
    if (!(grids[k].spec == spec)) throw ShapeError("write_montage: mixed grid specs");
    const int tr = static_cast<int>(k) / tiles_per_row, tc = static_cast<int>(k) % tiles_per_row;
    const int y0 = gap + tr * (spec.height + gap), x0 = gap + tc * (spec.width + gap);
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c) {
        const float v = grids[k].at(r, c);
        img[static_cast<std::size_t>(y0 + r) * W + (x0 + c)] =
            static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
  }
  write_png_gray8(path, W, H, img);
}

// --- analysis operations ---------------------------------------------------

// Draw n latent pairs from the standard-normal prior and decode them.
template <typename T>
std::vector<Ogm> sample_prior(Generator<T>& generator, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_prior: n must be >= 1");
  const ModelConfig& cfg = generator.config();
  Rng rng(seed);
  Tensor<T> style({n, cfg.style_dim});
  Tensor<T> content({n, cfg.content_channels, cfg.content_hw, cfg.content_hw});
  for (std::int64_t i = 0; i < style.size(); ++i) style[i] = static_cast<T>(rng.normal());
  for (std::int64_t i = 0; i < content.size(); ++i) content[i] = static_cast<T>(rng.normal());
  Tensor<T> decoded = generator.forward(style, content);
  std::vector<Ogm> out;
  const std::int64_t cells = cfg.grid.cells();
  for (int k = 0; k < n; ++k) {
    Ogm g(cfg.grid);
    for (std::int64_t i = 0; i < cells; ++i)
      g.values[static_cast<std::size_t>(i)] = static_cast<float>(decoded[k * cells + i]);
    out.push_back(std::move(g));
  }
  return out;
}

enum class SwapWhich { Style, Content };

inline SwapWhich swap_which_from_string(const std::string& s) {
  if (s == "style") return SwapWhich::Style;
  if (s == "content") return SwapWhich::Content;
  throw ConfigError("swap target must be 'style' or 'content'");
}

// Decode frame a with the selected latent replaced by frame b's.
template <typename T>
Ogm swap_latents(Encoder<T>& encoder, Generator<T>& generator, const Ogm& a, const Ogm& b,
                 SwapWhich which) {
  PosteriorBatch<T> pa = encoder.forward(ogm_to_tensor<T>(a));
  PosteriorBatch<T> pb = encoder.forward(ogm_to_tensor<T>(b));
  const Tensor<T>& style = which == SwapWhich::Style ? pb.mu_style : pa.mu_style;
  const Tensor<T>& content = which == SwapWhich::Content ? pb.mu_content : pa.mu_content;
  return tensor_to_ogm(generator.forward(style, content), generator.config().grid);
}

// Linear interpolation between the posterior means of two frames at
// alpha = k/(n_steps-1). The (1-a)*za + a*zb form makes the endpoints
// exact, so steps 0 and n_steps-1 decode bitwise equal to the plain
// reconstructions.
template <typename T>
std::vector<Ogm> interpolate(Encoder<T>& encoder, Generator<T>& generator, const Ogm& a,
                             const Ogm& b, int n_steps) {
  if (n_steps < 2) throw ConfigError("interpolate: need at least 2 steps");
  PosteriorBatch<T> pa = encoder.forward(ogm_to_tensor<T>(a));
  PosteriorBatch<T> pb = encoder.forward(ogm_to_tensor<T>(b));
  std::vector<Ogm> out;
  const ModelConfig& cfg = generator.config();
  for (int k = 0; k < n_steps; ++k) {
    const T alpha = static_cast<T>(k) / static_cast<T>(n_steps - 1);
    Tensor<T> style(pa.mu_style.shape());
    Tensor<T> content(pa.mu_content.shape());
    for (std::int64_t i = 0; i < style.size(); ++i)
      style[i] = (T(1) - alpha) * pa.mu_style[i] + alpha * pb.mu_style[i];
    for (std::int64_t i = 0; i < content.size(); ++i)
      content[i] = (T(1) - alpha) * pa.mu_content[i] + alpha * pb.mu_content[i];
    out.push_back(tensor_to_ogm(generator.forward(style, content), cfg.grid));
  }
  return out;
}

}  // namespace ogp
