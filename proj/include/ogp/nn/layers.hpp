#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ogp/rng.hpp"
#include "ogp/tensor.hpp"

namespace ogp::nn {

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T>
void add_param(ParamList<T>& list, const std::string& name, Tensor<T>& value, Tensor<T>& grad) {
  list.push_back(ParamRef<T>{name, &value, &grad});
}

namespace init {

template <typename T>
void normal(Tensor<T>& w, Rng& rng, double stddev) {
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.normal(0.0, stddev));
}

// Kaiming-style fan-in scaling for conv/linear weights.
template <typename T>
void kaiming(Tensor<T>& w, Rng& rng, std::int64_t fan_in) {
  normal(w, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

}  // namespace init

// Every layer keeps a stack of forward caches: forward pushes, backward
// pops. Recurrent models replay the same layer across time steps and
// backpropagate in exact reverse call order; single-pass models clear
// the stacks at the start of each forward.

namespace detail {

template <typename C>
class CacheStack {
 public:
  void push(C c) { stack_.push_back(std::move(c)); }
  C pop() {
    if (stack_.empty()) throw Error("layer backward without matching forward");
    C c = std::move(stack_.back());
    stack_.pop_back();
    return c;
  }
  void clear() { stack_.clear(); }

 private:
  std::vector<C> stack_;
};

}  // namespace detail

// ---------------------------------------------------------------------
// Fully connected: x [N,in] -> y [N,out], y = x W^T + b.
template <typename T>
class Linear {
 public:
  Linear(int in, int out, Rng& rng)
      : in_(in), out_(out), w_({out, in}), b_({out}), gw_({out, in}), gb_({out}) {
    init::kaiming(w_, rng, in);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0);
    if (x.ndim() != 2 || x.dim(1) != in_) throw ShapeError("Linear: bad input " + shape_str(x.shape()));
    Tensor<T> y({n, out_});
    y.mat(n, out_).noalias() = x.mat(n, in_) * w_.mat(out_, in_).transpose();
    y.mat(n, out_).rowwise() += b_.mat(1, out_).row(0);
    cache_.push(x);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> x = cache_.pop();
    const int n = dy.dim(0);
    gw_.mat(out_, in_).noalias() += dy.mat(n, out_).transpose() * x.mat(n, in_);
    gb_.mat(1, out_).row(0) += dy.mat(n, out_).colwise().sum();
    Tensor<T> dx({n, in_});
    dx.mat(n, in_).noalias() = dy.mat(n, out_) * w_.mat(out_, in_);
    return dx;
  }

  void clear_cache() { cache_.clear(); }
  void register_params(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".w", w_, gw_);
    add_param(out, prefix + ".b", b_, gb_);
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Tensor<T> w_, b_, gw_, gb_;
  detail::CacheStack<Tensor<T>> cache_;
};

// ---------------------------------------------------------------------
// 2D convolution via im2col + GEMM. x [N,Cin,H,W] -> y [N,Cout,Ho,Wo].
template <typename T>
class Conv2d {
 public:
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng)
      : cin_(in_ch),
        cout_(out_ch),
        k_(ksize),
        stride_(stride),
        pad_(pad),
        w_({out_ch, in_ch, ksize, ksize}),
        b_({out_ch}),
        gw_({out_ch, in_ch, ksize, ksize}),
        gb_({out_ch}) {
    init::kaiming(w_, rng, static_cast<std::int64_t>(in_ch) * ksize * ksize);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    check_input(x);
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int ho = out_dim(h), wo = out_dim(w);
    Tensor<T> y({n, cout_, ho, wo});
    Tensor<T> cols({cin_ * k_ * k_, ho * wo});
    auto wmat = w_.mat(cout_, cin_ * k_ * k_);
    for (int s = 0; s < n; ++s) {
      im2col(x, s, h, w, ho, wo, cols);
      Eigen::Map<typename Tensor<T>::Mat> ym(y.data() + sample_offset(y, s), cout_, ho * wo);
      ym.noalias() = wmat * cols.mat(cin_ * k_ * k_, ho * wo);
      ym.colwise() += b_.mat(cout_, 1).col(0);
    }
    cache_.push(x);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> x = cache_.pop();
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int ho = out_dim(h), wo = out_dim(w);
    Tensor<T> dx(x.shape());
    Tensor<T> cols({cin_ * k_ * k_, ho * wo});
    Tensor<T> dcols({cin_ * k_ * k_, ho * wo});
    auto wmat = w_.mat(cout_, cin_ * k_ * k_);
    auto gwm = gw_.mat(cout_, cin_ * k_ * k_);
    for (int s = 0; s < n; ++s) {
      im2col(x, s, h, w, ho, wo, cols);
      Eigen::Map<const typename Tensor<T>::Mat> dym(dy.data() + sample_offset(dy, s), cout_, ho * wo);
      gwm.noalias() += dym * cols.mat(cin_ * k_ * k_, ho * wo).transpose();
      gb_.mat(cout_, 1).col(0) += dym.rowwise().sum();
      dcols.mat(cin_ * k_ * k_, ho * wo).noalias() = wmat.transpose() * dym;
      col2im(dcols, s, h, w, ho, wo, dx);
    }
    return dx;
  }

  void clear_cache() { cache_.clear(); }
  void register_params(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".w", w_, gw_);
    add_param(out, prefix + ".b", b_, gb_);
  }

  int out_dim(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != cin_) throw ShapeError("Conv2d: bad input " + shape_str(x.shape()));
    if (out_dim(x.dim(2)) < 1 || out_dim(x.dim(3)) < 1)
      throw ShapeError("Conv2d: input too small for kernel/stride");
  }
  static std::int64_t sample_offset(const Tensor<T>& t, int s) {
    return static_cast<std::int64_t>(s) * (t.size() / t.dim(0));
  }

  void im2col(const Tensor<T>& x, int s, int h, int w, int ho, int wo, Tensor<T>& cols) const {
    const T* xs = x.data() + sample_offset(x, s);
    T* cp = cols.data();
    for (int ci = 0; ci < cin_; ++ci) {
      const T* plane = xs + static_cast<std::int64_t>(ci) * h * w;
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj) {
          for (int oi = 0; oi < ho; ++oi) {
            const int ii = oi * stride_ - pad_ + ki;
            for (int oj = 0; oj < wo; ++oj) {
              const int jj = oj * stride_ - pad_ + kj;
              *cp++ = (ii >= 0 && ii < h && jj >= 0 && jj < w) ? plane[ii * w + jj] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const Tensor<T>& dcols, int s, int h, int w, int ho, int wo, Tensor<T>& dx) const {
    T* xs = dx.data() + sample_offset(dx, s);
    const T* cp = dcols.data();
    for (int ci = 0; ci < cin_; ++ci) {
      T* plane = xs + static_cast<std::int64_t>(ci) * h * w;
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj) {
          for (int oi = 0; oi < ho; ++oi) {
            const int ii = oi * stride_ - pad_ + ki;
            for (int oj = 0; oj < wo; ++oj) {
              const int jj = oj * stride_ - pad_ + kj;
              if (ii >= 0 && ii < h && jj >= 0 && jj < w) plane[ii * w + jj] += *cp;
              ++cp;
            }
          }
        }
      }
    }
  }

  int cin_, cout_, k_, stride_, pad_;
  Tensor<T> w_, b_, gw_, gb_;
  detail::CacheStack<Tensor<T>> cache_;
};

// ---------------------------------------------------------------------
// Elementwise activations.
template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.2) : slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::int64_t i = 0; i < y.size(); ++i)
      if (y[i] < T(0)) y[i] *= slope_;
    cache_.push(x);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> x = cache_.pop();
    Tensor<T> dx = dy;
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (x[i] < T(0)) dx[i] *= slope_;
    return dx;
  }
  void clear_cache() { cache_.clear(); }

 private:
  T slope_;
  detail::CacheStack<Tensor<T>> cache_;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::int64_t i = 0; i < y.size(); ++i)
      if (y[i] < T(0)) y[i] = T(0);
    cache_.push(x);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> x = cache_.pop();
    Tensor<T> dx = dy;
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (x[i] < T(0)) dx[i] = T(0);
    return dx;
  }
  void clear_cache() { cache_.clear(); }

 private:
  detail::CacheStack<Tensor<T>> cache_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = sigmoid(y[i]);
    cache_.push(y);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> y = cache_.pop();
    Tensor<T> dx = dy;
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (T(1) - y[i]);
    return dx;
  }
  void clear_cache() { cache_.clear(); }
  static T sigmoid(T v) {
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }

 private:
  detail::CacheStack<Tensor<T>> cache_;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    cache_.push(y);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T> y = cache_.pop();
    Tensor<T> dx = dy;
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] *= T(1) - y[i] * y[i];
    return dx;
  }
  void clear_cache() { cache_.clear(); }

 private:
  detail::CacheStack<Tensor<T>> cache_;
};

// ---------------------------------------------------------------------
// Nearest-neighbor 2x upsample, [N,C,H,W] -> [N,C,2H,2W].
template <typename T>
class Upsample2x {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (int s = 0; s < n * c; ++s) {
      const T* xp = x.data() + static_cast<std::int64_t>(s) * h * w;
      T* yp = y.data() + static_cast<std::int64_t>(s) * 4 * h * w;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const T v = xp[i * w + j];
          T* row0 = yp + (2 * i) * 2 * w + 2 * j;
          row0[0] = v;
          row0[1] = v;
          row0[2 * w] = v;
          row0[2 * w + 1] = v;
        }
    }
    cache_.push(x.shape());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Shape shape = cache_.pop();
    const int n = shape[0], c = shape[1], h = shape[2], w = shape[3];
    Tensor<T> dx(shape);
    for (int s = 0; s < n * c; ++s) {
      T* xp = dx.data() + static_cast<std::int64_t>(s) * h * w;
      const T* yp = dy.data() + static_cast<std::int64_t>(s) * 4 * h * w;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const T* row0 = yp + (2 * i) * 2 * w + 2 * j;
          xp[i * w + j] = row0[0] + row0[1] + row0[2 * w] + row0[2 * w + 1];
        }
    }
    return dx;
  }
  void clear_cache() { cache_.clear(); }

 private:
  detail::CacheStack<Shape> cache_;
};

// 2x2 average pool (input pyramid for the multi-scale discriminator).
template <typename T>
class AvgPool2x {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) throw ShapeError("AvgPool2x: odd input dims");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c, h / 2, w / 2});
    for (int s = 0; s < n * c; ++s) {
      const T* xp = x.data() + static_cast<std::int64_t>(s) * h * w;
      T* yp = y.data() + static_cast<std::int64_t>(s) * (h / 2) * (w / 2);
      for (int i = 0; i < h / 2; ++i)
        for (int j = 0; j < w / 2; ++j) {
          const T* r0 = xp + (2 * i) * w + 2 * j;
          yp[i * (w / 2) + j] = static_cast<T>(0.25) * (r0[0] + r0[1] + r0[w] + r0[w + 1]);
        }
    }
    cache_.push(x.shape());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Shape shape = cache_.pop();
    const int n = shape[0], c = shape[1], h = shape[2], w = shape[3];
    Tensor<T> dx(shape);
    for (int s = 0; s < n * c; ++s) {
      T* xp = dx.data() + static_cast<std::int64_t>(s) * h * w;
      const T* yp = dy.data() + static_cast<std::int64_t>(s) * (h / 2) * (w / 2);
      for (int i = 0; i < h / 2; ++i)
        for (int j = 0; j < w / 2; ++j) {
          const T g = static_cast<T>(0.25) * yp[i * (w / 2) + j];
          T* r0 = xp + (2 * i) * w + 2 * j;
          r0[0] = g;
          r0[1] = g;
          r0[w] = g;
          r0[w + 1] = g;
        }
    }
    return dx;
  }
  void clear_cache() { cache_.clear(); }

 private:
  detail::CacheStack<Shape> cache_;
};

// Global average pool, [N,C,H,W] -> [N,C].
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1);
    const std::int64_t m = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    Tensor<T> y({n, c});
    for (int s = 0; s < n * c; ++s) {
      const T* xp = x.data() + static_cast<std::int64_t>(s) * m;
      T acc = T(0);
      for (std::int64_t i = 0; i < m; ++i) acc += xp[i];
      y[s] = acc / static_cast<T>(m);
    }
    cache_.push(x.shape());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    const Shape shape = cache_.pop();
    const std::int64_t m = static_cast<std::int64_t>(shape[2]) * shape[3];
    Tensor<T> dx(shape);
    for (int s = 0; s < shape[0] * shape[1]; ++s) {
      const T g = dy[s] / static_cast<T>(m);
      T* xp = dx.data() + static_cast<std::int64_t>(s) * m;
      for (std::int64_t i = 0; i < m; ++i) xp[i] = g;
    }
    return dx;
  }
  void clear_cache() { cache_.clear(); }

 private:
  detail::CacheStack<Shape> cache_;
};

// ---------------------------------------------------------------------
// Style modulation: per-channel instance normalization followed by a
// scale and shift computed from an affine map of the style vector,
//   gamma = Wg s + bg,  beta = Wb s + bb,
//   y     = gamma * (x - mu) / sqrt(var + eps) + beta.
template <typename T>
class StyleNorm {
 public:
  StyleNorm(int channels, int style_dim, Rng& rng)
      : c_(channels),
        s_(style_dim),
        wg_({channels, style_dim}),
        bg_({channels}, T(1)),
        wb_({channels, style_dim}),
        bb_({channels}),
        gwg_({channels, style_dim}),
        gbg_({channels}),
        gwb_({channels, style_dim}),
        gbb_({channels}) {
    init::normal(wg_, rng, 0.02);
    init::normal(wb_, rng, 0.02);
  }

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& style) {
    if (x.ndim() != 4 || x.dim(1) != c_) throw ShapeError("StyleNorm: bad feature input");
    if (style.ndim() != 2 || style.dim(1) != s_ || style.dim(0) != x.dim(0))
      throw ShapeError("StyleNorm: bad style input");
    const int n = x.dim(0);
    const std::int64_t m = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    Cache cache;
    cache.style = style;
    cache.xhat = Tensor<T>(x.shape());
    cache.inv_std = Tensor<T>({n, c_});
    cache.gamma = Tensor<T>({n, c_});
    Tensor<T> beta({n, c_});
    cache.gamma.mat(n, c_).noalias() = style.mat(n, s_) * wg_.mat(c_, s_).transpose();
    cache.gamma.mat(n, c_).rowwise() += bg_.mat(1, c_).row(0);
    beta.mat(n, c_).noalias() = style.mat(n, s_) * wb_.mat(c_, s_).transpose();
    beta.mat(n, c_).rowwise() += bb_.mat(1, c_).row(0);

    Tensor<T> y(x.shape());
    for (int nc = 0; nc < n * c_; ++nc) {
      const T* xp = x.data() + static_cast<std::int64_t>(nc) * m;
      T* hp = cache.xhat.data() + static_cast<std::int64_t>(nc) * m;
      T* yp = y.data() + static_cast<std::int64_t>(nc) * m;
      T mean = T(0);
      for (std::int64_t i = 0; i < m; ++i) mean += xp[i];
      mean /= static_cast<T>(m);
      T var = T(0);
      for (std::int64_t i = 0; i < m; ++i) {
        const T d = xp[i] - mean;
        var += d * d;
      }
      var /= static_cast<T>(m);
      const T inv = T(1) / std::sqrt(var + eps());
      cache.inv_std[nc] = inv;
      const T g = cache.gamma[nc], b = beta[nc];
      for (std::int64_t i = 0; i < m; ++i) {
        hp[i] = (xp[i] - mean) * inv;
        yp[i] = g * hp[i] + b;
      }
    }
    cache_.push(std::move(cache));
    return y;
  }

  // Returns dx; accumulates the style gradient into dstyle.
  Tensor<T> backward(const Tensor<T>& dy, Tensor<T>& dstyle) {
    const Cache cache = cache_.pop();
    const int n = dy.dim(0);
    const std::int64_t m = static_cast<std::int64_t>(dy.dim(2)) * dy.dim(3);
    Tensor<T> dx(dy.shape());
    Tensor<T> dgamma({n, c_}), dbeta({n, c_});
    for (int nc = 0; nc < n * c_; ++nc) {
      const T* hp = cache.xhat.data() + static_cast<std::int64_t>(nc) * m;
      const T* dyp = dy.data() + static_cast<std::int64_t>(nc) * m;
      T* dxp = dx.data() + static_cast<std::int64_t>(nc) * m;
      T dg = T(0), db = T(0);
      for (std::int64_t i = 0; i < m; ++i) {
        dg += dyp[i] * hp[i];
        db += dyp[i];
      }
      dgamma[nc] = dg;
      dbeta[nc] = db;
      const T g = cache.gamma[nc], inv = cache.inv_std[nc];
      const T sum1 = g * db;  // sum of dxhat
      const T sum2 = g * dg;  // sum of dxhat * xhat
      const T scale = inv / static_cast<T>(m);
      for (std::int64_t i = 0; i < m; ++i)
        dxp[i] = scale * (static_cast<T>(m) * g * dyp[i] - sum1 - hp[i] * sum2);
    }
    gwg_.mat(c_, s_).noalias() += dgamma.mat(n, c_).transpose() * cache.style.mat(n, s_);
    gbg_.mat(1, c_).row(0) += dgamma.mat(n, c_).colwise().sum();
    gwb_.mat(c_, s_).noalias() += dbeta.mat(n, c_).transpose() * cache.style.mat(n, s_);
    gbb_.mat(1, c_).row(0) += dbeta.mat(n, c_).colwise().sum();
    dstyle.mat(n, s_).noalias() += dgamma.mat(n, c_) * wg_.mat(c_, s_);
    dstyle.mat(n, s_).noalias() += dbeta.mat(n, c_) * wb_.mat(c_, s_);
    return dx;
  }

  void clear_cache() { cache_.clear(); }
  void register_params(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".wg", wg_, gwg_);
    add_param(out, prefix + ".bg", bg_, gbg_);
    add_param(out, prefix + ".wb", wb_, gwb_);
    add_param(out, prefix + ".bb", bb_, gbb_);
  }

  static constexpr T eps() { return static_cast<T>(1e-5); }

 private:
  struct Cache {
    Tensor<T> style, xhat, inv_std, gamma;
  };

  int c_, s_;
  Tensor<T> wg_, bg_, wb_, bb_;
  Tensor<T> gwg_, gbg_, gwb_, gbb_;
  detail::CacheStack<Cache> cache_;
};

// ---------------------------------------------------------------------
// Learned constant tensor broadcast across the batch; the generator
// concatenates it with the projected content latent.
template <typename T>
class ConstantInput {
 public:
  ConstantInput(int channels, int h, int w, Rng& rng)
      : value_({channels, h, w}), grad_({channels, h, w}) {
    init::normal(value_, rng, 0.02);
  }

  Tensor<T> forward(int n) {
    Tensor<T> y({n, value_.dim(0), value_.dim(1), value_.dim(2)});
    const std::int64_t m = value_.size();
    for (int s = 0; s < n; ++s)
      std::copy(value_.data(), value_.data() + m, y.data() + static_cast<std::int64_t>(s) * m);
    return y;
  }
  void backward(const Tensor<T>& dy) {
    const std::int64_t m = value_.size();
    for (int s = 0; s < dy.dim(0); ++s) {
      const T* p = dy.data() + static_cast<std::int64_t>(s) * m;
      for (std::int64_t i = 0; i < m; ++i) grad_[i] += p[i];
    }
  }

  void register_params(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".value", value_, grad_);
  }

 private:
  Tensor<T> value_, grad_;
};

// Channel concatenation of two feature maps with matching spatial dims.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ShapeError("concat_channels: shape mismatch");
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  Tensor<T> y({n, ca + cb, h, w});
  const std::int64_t ma = static_cast<std::int64_t>(ca) * h * w;
  const std::int64_t mb = static_cast<std::int64_t>(cb) * h * w;
  for (int s = 0; s < n; ++s) {
    std::copy(a.data() + s * ma, a.data() + (s + 1) * ma, y.data() + s * (ma + mb));
    std::copy(b.data() + s * mb, b.data() + (s + 1) * mb, y.data() + s * (ma + mb) + ma);
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int ca) {
  const int n = y.dim(0), c = y.dim(1), h = y.dim(2), w = y.dim(3);
  const int cb = c - ca;
  Tensor<T> a({n, ca, h, w}), b({n, cb, h, w});
  const std::int64_t ma = static_cast<std::int64_t>(ca) * h * w;
  const std::int64_t mb = static_cast<std::int64_t>(cb) * h * w;
  for (int s = 0; s < n; ++s) {
    std::copy(y.data() + s * (ma + mb), y.data() + s * (ma + mb) + ma, a.data() + s * ma);
    std::copy(y.data() + s * (ma + mb) + ma, y.data() + (s + 1) * (ma + mb), b.data() + s * mb);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace ogp::nn
