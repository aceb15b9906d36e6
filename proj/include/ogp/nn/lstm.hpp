#pragma once

#include <vector>

#include "ogp/nn/layers.hpp"

namespace ogp::nn {

// Single LSTM cell with explicit step/backward-step API so callers can
// run teacher-forced or autoregressive sequences and backpropagate
// through time in reverse order. Gate block order in the weight rows is
// (input, forget, cell, output); the forget-gate bias starts at 1.
template <typename T>
class LstmCell {
 public:
  LstmCell(int input, int hidden, Rng& rng)
      : in_(input),
        hid_(hidden),
        wx_({4 * hidden, input}),
        wh_({4 * hidden, hidden}),
        b_({4 * hidden}),
        gwx_({4 * hidden, input}),
        gwh_({4 * hidden, hidden}),
        gb_({4 * hidden}) {
    init::kaiming(wx_, rng, input);
    init::kaiming(wh_, rng, hidden);
    for (int i = hid_; i < 2 * hid_; ++i) b_[i] = T(1);
  }

  struct State {
    Tensor<T> h, c;
  };

  State zero_state(int n) const { return State{Tensor<T>({n, hid_}), Tensor<T>({n, hid_})}; }

  void clear_cache() { steps_.clear(); }
  std::size_t cached_steps() const { return steps_.size(); }

  State step(const Tensor<T>& x, const State& prev) {
    const int n = x.dim(0);
    if (x.ndim() != 2 || x.dim(1) != in_) throw ShapeError("LstmCell: bad input " + shape_str(x.shape()));
    StepCache cache;
    cache.x = x;
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;

    Tensor<T> gates({n, 4 * hid_});
    gates.mat(n, 4 * hid_).noalias() = x.mat(n, in_) * wx_.mat(4 * hid_, in_).transpose();
    gates.mat(n, 4 * hid_).noalias() += prev.h.mat(n, hid_) * wh_.mat(4 * hid_, hid_).transpose();
    gates.mat(n, 4 * hid_).rowwise() += b_.mat(1, 4 * hid_).row(0);

    State out{Tensor<T>({n, hid_}), Tensor<T>({n, hid_})};
    cache.i = Tensor<T>({n, hid_});
    cache.f = Tensor<T>({n, hid_});
    cache.g = Tensor<T>({n, hid_});
    cache.o = Tensor<T>({n, hid_});
    cache.tanh_c = Tensor<T>({n, hid_});
    for (int s = 0; s < n; ++s) {
      const T* gp = gates.data() + static_cast<std::int64_t>(s) * 4 * hid_;
      for (int j = 0; j < hid_; ++j) {
        const std::int64_t idx = static_cast<std::int64_t>(s) * hid_ + j;
        const T i_ = Sigmoid<T>::sigmoid(gp[j]);
        const T f_ = Sigmoid<T>::sigmoid(gp[hid_ + j]);
        const T g_ = std::tanh(gp[2 * hid_ + j]);
        const T o_ = Sigmoid<T>::sigmoid(gp[3 * hid_ + j]);
        const T c_ = f_ * prev.c[idx] + i_ * g_;
        const T tc = std::tanh(c_);
        cache.i[idx] = i_;
        cache.f[idx] = f_;
        cache.g[idx] = g_;
        cache.o[idx] = o_;
        cache.tanh_c[idx] = tc;
        out.c[idx] = c_;
        out.h[idx] = o_ * tc;
      }
    }
    steps_.push_back(std::move(cache));
    return out;
  }

  // Consumes the most recent cached step. dh/dc are gradients w.r.t. the
  // step outputs; returns dx and overwrites dh/dc with gradients w.r.t.
  // the previous state.
  Tensor<T> backward_step(Tensor<T>& dh, Tensor<T>& dc) {
    if (steps_.empty()) throw Error("LstmCell: backward without cached step");
    StepCache cache = std::move(steps_.back());
    steps_.pop_back();
    const int n = cache.x.dim(0);

    Tensor<T> da({n, 4 * hid_});
    Tensor<T> dc_prev({n, hid_});
    for (int s = 0; s < n; ++s) {
      T* dap = da.data() + static_cast<std::int64_t>(s) * 4 * hid_;
      for (int j = 0; j < hid_; ++j) {
        const std::int64_t idx = static_cast<std::int64_t>(s) * hid_ + j;
        const T i_ = cache.i[idx], f_ = cache.f[idx], g_ = cache.g[idx], o_ = cache.o[idx];
        const T tc = cache.tanh_c[idx];
        const T dct = dc[idx] + dh[idx] * o_ * (T(1) - tc * tc);
        const T do_ = dh[idx] * tc;
        const T di = dct * g_;
        const T df = dct * cache.c_prev[idx];
        const T dg = dct * i_;
        dc_prev[idx] = dct * f_;
        dap[j] = di * i_ * (T(1) - i_);
        dap[hid_ + j] = df * f_ * (T(1) - f_);
        dap[2 * hid_ + j] = dg * (T(1) - g_ * g_);
        dap[3 * hid_ + j] = do_ * o_ * (T(1) - o_);
      }
    }

    gwx_.mat(4 * hid_, in_).noalias() += da.mat(n, 4 * hid_).transpose() * cache.x.mat(n, in_);
    gwh_.mat(4 * hid_, hid_).noalias() += da.mat(n, 4 * hid_).transpose() * cache.h_prev.mat(n, hid_);
    gb_.mat(1, 4 * hid_).row(0) += da.mat(n, 4 * hid_).colwise().sum();

    Tensor<T> dx({n, in_});
    dx.mat(n, in_).noalias() = da.mat(n, 4 * hid_) * wx_.mat(4 * hid_, in_);
    Tensor<T> dh_prev({n, hid_});
    dh_prev.mat(n, hid_).noalias() = da.mat(n, 4 * hid_) * wh_.mat(4 * hid_, hid_);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
    return dx;
  }

  void register_params(const std::string& prefix, ParamList<T>& out) {
    add_param(out, prefix + ".wx", wx_, gwx_);
    add_param(out, prefix + ".wh", wh_, gwh_);
    add_param(out, prefix + ".b", b_, gb_);
  }

  int input_size() const { return in_; }
  int hidden_size() const { return hid_; }

 private:
  struct StepCache {
    Tensor<T> x, h_prev, c_prev, i, f, g, o, tanh_c;
  };

  int in_, hid_;
  Tensor<T> wx_, wh_, b_, gwx_, gwh_, gb_;
  std::vector<StepCache> steps_;
};

}  // namespace ogp::nn
